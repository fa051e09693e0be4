//! Transition records `(s_t, a_t, a_{t-1}) → (s_{t+1}, r_t)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::agent::Controller;
use crate::env::{action_labels, state_features, state_labels, CtapEnv, ScenarioConfig};
use crate::linalg::Rng;
use crate::{Error, Result, OMEGA_MAX};

/// Minimum number of rows accepted for analysis.
pub const MIN_ROWS: usize = 1000;

/// Role of a dataset column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColumnKind {
    State,
    Action,
    PrevAction,
    NextState,
    Reward,
}

impl ColumnKind {
    pub fn is_current_layer(self) -> bool {
        matches!(self, ColumnKind::State | ColumnKind::Action | ColumnKind::PrevAction)
    }
}

/// Rectangular table of transitions. Columns are state variables, actions,
/// previous actions (`_prev`), next-step state variables (`_next`) and the
/// reward.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDataset {
    columns: Vec<String>,
    kinds: Vec<ColumnKind>,
    /// Column-major storage.
    data: Vec<Vec<f64>>,
}

/// Column names and kinds for an `n_dots` array.
pub fn transition_layout(n_dots: usize) -> Vec<(String, ColumnKind)> {
    let states = state_labels(n_dots);
    let actions = action_labels(n_dots);
    let mut out = Vec::new();
    out.extend(states.iter().map(|s| (s.clone(), ColumnKind::State)));
    out.extend(actions.iter().map(|a| (a.clone(), ColumnKind::Action)));
    out.extend(actions.iter().map(|a| (format!("{a}_prev"), ColumnKind::PrevAction)));
    out.extend(states.iter().map(|s| (format!("{s}_next"), ColumnKind::NextState)));
    out.push(("reward".into(), ColumnKind::Reward));
    out
}

/// Infers the kind of a column from its name suffix.
pub fn kind_from_name(name: &str) -> ColumnKind {
    if name == "reward" {
        ColumnKind::Reward
    } else if name.ends_with("_next") {
        ColumnKind::NextState
    } else if name.ends_with("_prev") {
        ColumnKind::PrevAction
    } else if name.starts_with("omega") {
        ColumnKind::Action
    } else {
        ColumnKind::State
    }
}

impl TransitionDataset {
    /// Builds a dataset from named columns; kinds follow the naming scheme
    /// of [`transition_layout`].
    pub fn from_columns(columns: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != data.len() || columns.is_empty() {
            return Err(Error::invalid("need one data vector per column"));
        }
        let n = data[0].len();
        if data.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("dataset columns have different lengths"));
        }
        if data.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::invalid("dataset contains NaN"));
        }
        let kinds = columns.iter().map(|c| kind_from_name(c)).collect();
        Ok(Self { columns, kinds, data })
    }

    /// Builds a dataset from row records.
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = alloc::vec![Vec::with_capacity(rows.len()); columns.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::invalid(format!("row {i} has {} fields, expected {}", row.len(), columns.len())));
            }
            for (c, v) in data.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        Self::from_columns(columns, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[r]).collect()
    }

    pub fn indices_of(&self, kind: ColumnKind) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| self.kinds[i] == kind).collect()
    }
}

/// How actions are chosen while collecting transitions.
#[derive(Clone, Copy)]
pub enum Behaviour<'a> {
    /// Greedy actions of a controller plus Gaussian noise.
    Controller(&'a dyn Controller),
    /// Independent uniform couplings in `[0, Ω_max]`.
    Random,
}

impl core::fmt::Debug for Behaviour<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Behaviour::Controller(_) => f.write_str("Controller"),
            Behaviour::Random => f.write_str("Random"),
        }
    }
}

/// Rolls out episodes until exactly `n_samples` transitions are recorded.
///
/// Controller actions get additive noise of standard deviation
/// `exploration_std · Ω_max` and are clipped by the environment; the
/// recorded action is the applied one. State columns always hold the full
/// dot block, whatever the observation mode.
pub fn collect_transitions(
    config: &ScenarioConfig,
    behaviour: Behaviour<'_>,
    n_samples: usize,
    seed: u64,
    exploration_std: f64,
) -> Result<TransitionDataset> {
    if n_samples < MIN_ROWS {
        return Err(Error::invalid(format!("need at least {MIN_ROWS} samples, got {n_samples}")));
    }
    if !(exploration_std >= 0.0 && exploration_std.is_finite()) {
        return Err(Error::invalid("exploration_std must be non-negative"));
    }
    let layout = transition_layout(config.n_dots);
    let mut rows = Vec::with_capacity(n_samples);
    let mut env = CtapEnv::new(config.clone())?;
    let mut rng = Rng::seed_from_u64(seed);
    while rows.len() < n_samples {
        let mut obs = env.reset(seed);
        while !env.is_done() && rows.len() < n_samples {
            let action: Vec<f64> = match behaviour {
                Behaviour::Controller(c) => c
                    .action(env.steps_taken(), &obs)?
                    .into_iter()
                    .map(|a| a + exploration_std * OMEGA_MAX * rng.normal())
                    .collect(),
                Behaviour::Random => (0..config.action_dim()).map(|_| OMEGA_MAX * rng.uniform()).collect(),
            };
            let mut row = state_features(env.state());
            let prev = env.prev_action().to_vec();
            let step = env.step(&action)?;
            row.extend_from_slice(env.prev_action());
            row.extend(prev);
            row.extend(state_features(env.state()));
            row.push(step.reward);
            rows.push(row);
            obs = step.observation;
        }
    }
    TransitionDataset::from_rows(layout.into_iter().map(|(n, _)| n).collect(), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ScheduleController;
    use crate::pulses::{gaussian_ctap_pair, GaussianShape, PulseOrder};

    #[test]
    fn layout_has_twenty_three_columns() {
        let l = transition_layout(3);
        assert_eq!(l.len(), 23);
        assert_eq!(l[9].0, "omega12");
        assert_eq!(l[11].0, "omega12_prev");
        assert_eq!(l[13].0, "rho11_next");
        for (name, kind) in &l {
            assert_eq!(kind_from_name(name), *kind);
        }
    }

    #[test]
    fn thousand_samples_fill_twenty_episodes() {
        let cfg = ScenarioConfig::default();
        let d = collect_transitions(&cfg, Behaviour::Random, 1000, 3, 0.0).unwrap();
        assert_eq!(d.n_rows(), 1000);
        let prev = d.column_index("omega12_prev").unwrap();
        let starts = (0..1000).filter(|&r| d.column(prev)[r] == 0.0 && d.column(0)[r] == 1.0).count();
        assert_eq!(starts, 20);
        assert!(collect_transitions(&cfg, Behaviour::Random, 999, 3, 0.0).is_err());
    }

    #[test]
    fn noiseless_controller_repeats_episodes() {
        let cfg = ScenarioConfig::default();
        let s = gaussian_ctap_pair(cfg.t_max, 50, PulseOrder::CounterIntuitive, GaussianShape::default()).unwrap();
        let c = ScheduleController(s);
        let d = collect_transitions(&cfg, Behaviour::Controller(&c), 1000, 0, 0.0).unwrap();
        for r in 0..50 {
            assert_eq!(d.row(r), d.row(r + 50));
            assert_eq!(d.row(r), d.row(r + 950));
        }
        let next = d.column_index("rho22_next").unwrap();
        assert_eq!(d.column(1)[1], d.column(next)[0]);
    }
}
