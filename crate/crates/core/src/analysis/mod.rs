//! Which state variables matter: transition datasets, tree-ensemble
//! importances and the two-slice dependency graph built from them.

mod dataset;
mod forest;
mod tbn;

pub use dataset::{collect_transitions, kind_from_name, transition_layout, Behaviour, ColumnKind, TransitionDataset, MIN_ROWS};
pub use forest::{fit_forest, BinnedFeatures, Forest, ForestConfig};
pub use tbn::{
    base_name, build_2tbn, export_dot, feature_importance, relevance_closure, DependencyGraph, FeatureImportance,
    GraphEdge, GraphNode, NodeKind, Selection, TbnConfig, MAX_PEN_WIDTH,
};
