//! Two-slice dependency graph between time-step variables and the reward.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::dataset::{ColumnKind, TransitionDataset, MIN_ROWS};
use super::forest::{fit_forest, BinnedFeatures, ForestConfig};
use crate::{Error, Result};

/// Importance scores of `candidates` for explaining `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImportance {
    /// One score per candidate, in candidate order; sums to 1 unless degenerate.
    pub scores: Vec<f64>,
    /// The target was constant; all scores are zero.
    pub degenerate: bool,
    pub oob_r2: f64,
}

pub fn feature_importance(
    dataset: &TransitionDataset,
    target: usize,
    candidates: &[usize],
    cfg: &ForestConfig,
) -> Result<FeatureImportance> {
    if candidates.contains(&target) {
        return Err(Error::invalid("the target cannot be its own candidate"));
    }
    let cols: Vec<&[f64]> = candidates.iter().map(|&c| dataset.column(c)).collect();
    let x = BinnedFeatures::new(&cols, cfg.n_bins)?;
    let f = fit_forest(&x, dataset.column(target), cfg)?;
    Ok(FeatureImportance { scores: f.importances, degenerate: f.degenerate, oob_r2: f.oob_r2 })
}

/// How parents are chosen for each target.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Keep every candidate whose importance reaches epsilon.
    Threshold,
    /// Forward selection: repeatedly rank the remaining candidates against
    /// the residual of the current model and add the top one while the
    /// out-of-bag R² improves by at least `min_r2_gain`.
    Iterative { min_r2_gain: f64, max_inputs: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TbnConfig {
    pub epsilon: f64,
    pub forest: ForestConfig,
    pub selection: Selection,
    /// Exclude state variables that are exact affine functions of later
    /// state columns (e.g. `rho11 = 1 − rho22 − rho33` without loss).
    pub drop_affine: bool,
}

impl Default for TbnConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            forest: ForestConfig::default(),
            selection: Selection::Iterative { min_r2_gain: 0.01, max_inputs: 6 },
            drop_affine: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    StateT,
    ActionT,
    PrevActionT,
    StateT1,
    Reward,
}

impl NodeKind {
    fn layer(self) -> usize {
        match self {
            NodeKind::StateT | NodeKind::ActionT | NodeKind::PrevActionT => 0,
            NodeKind::StateT1 => 1,
            NodeKind::Reward => 2,
        }
    }

    fn from_column(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::State => NodeKind::StateT,
            ColumnKind::Action => NodeKind::ActionT,
            ColumnKind::PrevAction => NodeKind::PrevActionT,
            ColumnKind::NextState => NodeKind::StateT1,
            ColumnKind::Reward => NodeKind::Reward,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    /// Dataset column name.
    pub name: String,
    pub kind: NodeKind,
    pub prunable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependencyGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    /// Variables needed to explain the reward, directly or through the
    /// dynamics: state names plus any action columns among their parents.
    pub relevant: Vec<String>,
    /// State variables excluded as exact affine functions of others.
    pub redundant: Vec<String>,
    /// Out-of-bag R² of each target's model on its chosen parents.
    pub fit_quality: Vec<(String, f64)>,
}

impl DependencyGraph {
    pub fn parents(&self, target: &str) -> Vec<&str> {
        self.edges.iter().filter(|e| e.target == target).map(|e| e.source.as_str()).collect()
    }

    pub fn prunable(&self) -> Vec<&str> {
        let mut out: Vec<&str> =
            self.nodes.iter().filter(|n| n.prunable && n.kind == NodeKind::StateT).map(|n| n.name.as_str()).collect();
        out.sort_unstable();
        out
    }
}

/// Name of the state variable behind a next-step column.
pub fn base_name(column: &str) -> &str {
    column.strip_suffix("_next").unwrap_or(column)
}

/// Variables reachable from the reward's parents through the dynamics
/// edges. Returns sorted names; applying it to its own output is a no-op.
pub fn relevance_closure(edges: &[GraphEdge], seeds: &BTreeSet<String>) -> BTreeSet<String> {
    let mut relevant = seeds.clone();
    let mut queue: Vec<String> = seeds.iter().cloned().collect();
    while let Some(v) = queue.pop() {
        let target = format!("{v}_next");
        for e in edges.iter().filter(|e| e.target == target) {
            if relevant.insert(e.source.clone()) {
                queue.push(e.source.clone());
            }
        }
    }
    relevant
}

/// Columns among `cols` (in order) that are exact affine combinations of
/// the columns after them.
fn affine_redundant(dataset: &TransitionDataset, cols: &[usize]) -> Vec<usize> {
    let n = dataset.n_rows() as f64;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let unit = libm::sqrt(1.0 / n);
    basis.push(alloc::vec![unit; dataset.n_rows()]);
    let mut redundant = Vec::new();
    for &c in cols.iter().rev() {
        let mut v = dataset.column(c).to_vec();
        let scale = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-300);
        // Two Gram-Schmidt passes keep the residual accurate.
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(y, x)| *y -= p * x);
            }
        }
        let r = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if r <= 1e-9 * scale {
            redundant.push(c);
        } else {
            v.iter_mut().for_each(|x| *x /= r);
            basis.push(v);
        }
    }
    redundant.sort_unstable();
    redundant
}

/// Chosen parents of one target with their weights.
fn select_parents(
    x: &BinnedFeatures,
    y: &[f64],
    candidates: &[usize],
    cfg: &TbnConfig,
) -> Result<(Vec<(usize, f64)>, f64)> {
    match cfg.selection {
        Selection::Threshold => {
            let f = fit_forest(&x.select(candidates), y, &cfg.forest)?;
            let parents =
                candidates.iter().zip(&f.importances).filter(|(_, &w)| w >= cfg.epsilon).map(|(&c, &w)| (c, w)).collect();
            Ok((parents, f.oob_r2))
        }
        Selection::Iterative { min_r2_gain, max_inputs } => {
            let mut selected: Vec<usize> = Vec::new();
            let mut residual = y.to_vec();
            let mut r2 = 0.0;
            while selected.len() < max_inputs {
                let remaining: Vec<usize> = candidates.iter().copied().filter(|c| !selected.contains(c)).collect();
                if remaining.is_empty() {
                    break;
                }
                let ranking = fit_forest(&x.select(&remaining), &residual, &cfg.forest)?;
                if ranking.degenerate {
                    break;
                }
                let best = (0..remaining.len())
                    .fold(0, |b, i| if ranking.importances[i] > ranking.importances[b] { i } else { b });
                let mut trial = selected.clone();
                trial.push(remaining[best]);
                let model = fit_forest(&x.select(&trial), y, &cfg.forest)?;
                if model.degenerate || model.oob_r2 - r2 < min_r2_gain {
                    break;
                }
                selected = trial;
                r2 = model.oob_r2;
                residual = y.iter().zip(&model.oob_predictions).map(|(v, p)| v - p).collect();
            }
            if selected.is_empty() {
                return Ok((Vec::new(), 0.0));
            }
            let f = fit_forest(&x.select(&selected), y, &cfg.forest)?;
            let parents = selected.iter().zip(&f.importances).filter(|(_, &w)| w >= cfg.epsilon).map(|(&c, &w)| (c, w)).collect();
            Ok((parents, f.oob_r2))
        }
    }
}

/// Estimates parents for every next-step state variable (from the time-t
/// layer) and for the reward (from the next-step states it is computed
/// on), then marks state variables outside the reward's relevance closure
/// as prunable.
pub fn build_2tbn(dataset: &TransitionDataset, cfg: &TbnConfig) -> Result<DependencyGraph> {
    if dataset.n_rows() < MIN_ROWS {
        return Err(Error::invalid(format!("need at least {MIN_ROWS} rows, got {}", dataset.n_rows())));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::invalid("epsilon must lie in (0, 1)"));
    }
    let names = dataset.columns();
    let states = dataset.indices_of(ColumnKind::State);
    let next_states = dataset.indices_of(ColumnKind::NextState);
    let reward = *dataset.indices_of(ColumnKind::Reward).first().ok_or_else(|| Error::invalid("dataset has no reward column"))?;

    let redundant: Vec<usize> = if cfg.drop_affine { affine_redundant(dataset, &states) } else { Vec::new() };
    let redundant_names: BTreeSet<&str> = redundant.iter().map(|&c| names[c].as_str()).collect();
    let layer_t: Vec<usize> = (0..names.len())
        .filter(|&c| dataset.kinds()[c].is_current_layer() && !redundant.contains(&c))
        .collect();
    let targets: Vec<usize> =
        next_states.iter().copied().filter(|&c| !redundant_names.contains(base_name(&names[c]))).collect();

    let all: Vec<&[f64]> = (0..names.len()).map(|c| dataset.column(c)).collect();
    let x = BinnedFeatures::new(&all, cfg.forest.n_bins)?;

    let mut edges = Vec::new();
    let mut fit_quality = Vec::new();
    let mut add_edges = |target: usize, candidates: &[usize], edges: &mut Vec<GraphEdge>| -> Result<()> {
        let (parents, r2) = select_parents(&x, dataset.column(target), candidates, cfg)?;
        fit_quality.push((names[target].clone(), r2));
        edges.extend(parents.into_iter().map(|(c, w)| GraphEdge { source: names[c].clone(), target: names[target].clone(), weight: w }));
        Ok(())
    };
    for &t in &targets {
        add_edges(t, &layer_t, &mut edges)?;
    }
    add_edges(reward, &targets, &mut edges)?;
    edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));

    let seeds: BTreeSet<String> =
        edges.iter().filter(|e| e.target == names[reward]).map(|e| base_name(&e.source).to_string()).collect();
    let relevant = relevance_closure(&edges, &seeds);
    let relevant_states: BTreeSet<&str> = relevant.iter().map(|s| s.as_str()).collect();

    let nodes = (0..names.len())
        .map(|c| {
            let kind = NodeKind::from_column(dataset.kinds()[c]);
            let prunable = matches!(kind, NodeKind::StateT | NodeKind::StateT1)
                && !relevant_states.contains(base_name(&names[c]));
            GraphNode { name: names[c].clone(), kind, prunable }
        })
        .collect();
    Ok(DependencyGraph {
        nodes,
        edges,
        relevant: relevant.into_iter().collect(),
        redundant: redundant_names.into_iter().map(String::from).collect(),
        fit_quality,
    })
}

/// Largest edge pen width, drawn for importance 1.
pub const MAX_PEN_WIDTH: f64 = 5.0;

/// Graphviz rendering with one rank per layer and nodes sorted by name.
pub fn export_dot(graph: &DependencyGraph) -> String {
    let mut layers: BTreeMap<usize, Vec<&GraphNode>> = BTreeMap::new();
    for n in &graph.nodes {
        layers.entry(n.kind.layer()).or_default().push(n);
    }
    let mut out = String::from("digraph tbn {\n  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n");
    for nodes in layers.values_mut() {
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        out.push_str("  { rank=same;\n");
        for n in nodes.iter() {
            let shape = match n.kind {
                NodeKind::StateT | NodeKind::StateT1 => "circle",
                NodeKind::ActionT | NodeKind::PrevActionT => "box",
                NodeKind::Reward => "diamond",
            };
            let style = match (n.kind, n.prunable) {
                (NodeKind::Reward, _) => ", style=filled, fillcolor=grey",
                (_, true) => ", style=dashed",
                _ => "",
            };
            let _ = writeln!(out, "    \"{}\" [shape={shape}{style}];", n.name);
        }
        out.push_str("  }\n");
    }
    for e in &graph.edges {
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [penwidth={:.3}];", e.source, e.target, MAX_PEN_WIDTH * e.weight);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dataset::transition_layout;
    use crate::linalg::Rng;
    use alloc::vec;
    use alloc::vec::Vec;

    /// States and actions drawn at random, next state equal to the current
    /// one and reward equal to the next `rho33`.
    fn frozen_dataset(n: usize, seed: u64) -> TransitionDataset {
        let layout = transition_layout(3);
        let mut rng = Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let s: Vec<f64> = (0..9).map(|_| rng.uniform()).collect();
                let mut row = s.clone();
                row.extend((0..4).map(|_| rng.uniform()));
                row.extend(&s);
                row.push(s[2]);
                row
            })
            .collect();
        TransitionDataset::from_rows(layout.into_iter().map(|(n, _)| n).collect(), &rows).unwrap()
    }

    fn fast() -> TbnConfig {
        TbnConfig { forest: ForestConfig { n_trees: 20, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn frozen_dynamics_keep_only_the_rewarded_variable() {
        let d = frozen_dataset(3000, 1);
        for selection in [Selection::Threshold, fast().selection] {
            let g = build_2tbn(&d, &TbnConfig { selection, ..fast() }).unwrap();
            assert_eq!(g.parents("reward"), vec!["rho33_next"]);
            assert_eq!(g.relevant, vec!["rho33".to_string()]);
            assert_eq!(g.prunable().len(), 8);
        }
    }

    #[test]
    fn closure_is_a_fixed_point() {
        let d = frozen_dataset(2000, 2);
        let g = build_2tbn(&d, &fast()).unwrap();
        let once: BTreeSet<String> = g.relevant.iter().cloned().collect();
        assert_eq!(relevance_closure(&g.edges, &once), once);
    }

    #[test]
    fn affine_columns_are_detected() {
        let mut rng = Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.0 - x - y).collect();
        let d = TransitionDataset::from_columns(vec!["rho11".into(), "rho22".into(), "rho33".into()], vec![c, a, b]).unwrap();
        assert_eq!(affine_redundant(&d, &[0, 1, 2]), vec![0]);
    }

    #[test]
    fn dot_output() {
        let node = |name: &str, kind, prunable| GraphNode { name: name.into(), kind, prunable };
        let mut g = DependencyGraph {
            nodes: vec![node("rho33", NodeKind::StateT, false), node("rho22", NodeKind::StateT, true), node("reward", NodeKind::Reward, false)],
            edges: vec![],
            relevant: vec![],
            redundant: vec![],
            fit_quality: vec![],
        };
        let empty = export_dot(&g);
        assert!(!empty.contains("->"));
        assert!(empty.find("\"rho22\"").unwrap() < empty.find("\"rho33\"").unwrap());
        assert!(empty.contains("\"rho22\" [shape=circle, style=dashed]"));
        assert_eq!(empty, export_dot(&g));
        g.edges.push(GraphEdge { source: "rho33".into(), target: "reward".into(), weight: 1.0 });
        let one = export_dot(&g);
        assert_eq!(one.lines().filter(|l| l.contains("->")).count(), 1);
        assert!(one.contains("penwidth=5.000"));
    }
}
