//! Episodic control environment over the master-equation simulator.
//!
//! An episode starts with the electron on dot 1 and all couplings off. Each
//! call to [`CtapEnv::step`] applies the agent's couplings for one control
//! interval (zero-order hold), advances the state and scores the post-step
//! state.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quantum::{step as propagate, DensityMatrix, MasterEquationModel, Method};
use crate::{Error, Result, OMEGA_MAX};

/// Which parts of the state the agent sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationMode {
    /// Every real degree of freedom of the dot block plus previous actions.
    Full,
    /// Occupations of dots 2..N plus previous actions.
    Reduced,
}

impl ObservationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationMode::Full => "full",
            ObservationMode::Reduced => "reduced",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ObservationMode::Full),
            "reduced" => Ok(ObservationMode::Reduced),
            other => Err(Error::invalid(format!("unknown observation mode `{other}`"))),
        }
    }
}

/// One simulated scenario: array size, disturbances, horizon and reward.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n_dots: usize,
    /// Episode duration in natural units (1/Ω_max).
    pub t_max: f64,
    pub n_steps: usize,
    pub delta12: f64,
    pub delta23: f64,
    pub gamma_d: f64,
    pub gamma_l: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Early stop once the last-dot occupation exceeds this for `patience`
    /// consecutive steps.
    pub rho33_threshold: Option<f64>,
    pub patience: usize,
    pub observation_mode: ObservationMode,
    pub integrator: Integrator,
    /// RK4 substeps per control interval; ignored by the exact integrator.
    pub n_substeps: usize,
}

/// Propagator used for each control interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Exponential of the Lindblad superoperator; exact for piecewise-constant controls.
    Expm,
    Rk4,
}

impl Integrator {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrator::Expm => "expm",
            Integrator::Rk4 => "rk4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "expm" => Ok(Integrator::Expm),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::invalid(format!("unknown integrator `{other}`"))),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_dots: 3,
            t_max: 12.0 * PI,
            n_steps: 50,
            delta12: 0.0,
            delta23: 0.0,
            gamma_d: 0.0,
            gamma_l: 0.0,
            alpha: 1.0,
            beta: 4.0,
            rho33_threshold: None,
            patience: 5,
            observation_mode: ObservationMode::Full,
            integrator: Integrator::Expm,
            n_substeps: 40,
        }
    }
}

impl ScenarioConfig {
    /// Sets the horizon from a multiple of π/Ω_max.
    pub fn with_t_max_pi_units(mut self, units: f64) -> Self {
        self.t_max = units * PI / OMEGA_MAX;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dots != 3 && self.n_dots != 5 {
            return Err(Error::invalid("n_dots must be 3 or 5"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid("t_max must be positive"));
        }
        if self.n_steps < 2 {
            return Err(Error::invalid("n_steps must be at least 2"));
        }
        if self.n_dots == 5 && (self.delta12 != 0.0 || self.delta23 != 0.0) {
            return Err(Error::invalid("detuning is only modelled for three dots"));
        }
        if self.n_dots == 3 && !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("reward coefficients alpha and beta must be positive"));
        }
        if let Some(th) = self.rho33_threshold {
            if !(th > 0.0 && th <= 1.0) {
                return Err(Error::invalid("rho33_threshold must lie in (0, 1]"));
            }
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.n_substeps == 0 {
            return Err(Error::invalid("n_substeps must be at least 1"));
        }
        self.model().map(|_| ())
    }

    pub fn model(&self) -> Result<MasterEquationModel> {
        match self.n_dots {
            3 => MasterEquationModel::three_dot(self.delta12, self.delta23, self.gamma_d, self.gamma_l),
            n => MasterEquationModel::new(n, vec![0.0; n], self.gamma_d, self.gamma_l),
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn action_dim(&self) -> usize {
        if self.n_dots == 3 {
            2
        } else {
            3
        }
    }

    pub fn observation_dim(&self) -> usize {
        let state = match self.observation_mode {
            ObservationMode::Full => self.n_dots * self.n_dots,
            ObservationMode::Reduced => self.n_dots - 1,
        };
        state + self.action_dim()
    }

    pub fn method(&self) -> Method {
        match self.integrator {
            Integrator::Expm => Method::Expm,
            Integrator::Rk4 => Method::Rk4 { substeps: self.n_substeps },
        }
    }

    /// Names of the observation entries, in order.
    pub fn observation_labels(&self) -> Vec<String> {
        let mut labels = match self.observation_mode {
            ObservationMode::Full => state_labels(self.n_dots),
            ObservationMode::Reduced => (2..=self.n_dots).map(|k| format!("rho{k}{k}")).collect(),
        };
        labels.extend(action_labels(self.n_dots).into_iter().map(|a| format!("{a}_prev")));
        labels
    }
}

/// Names of the real degrees of freedom of the dot block, matching
/// [`state_features`]: populations, then `re_/im_rho{jk}` for `j < k`.
pub fn state_labels(n_dots: usize) -> Vec<String> {
    let mut out: Vec<String> = (1..=n_dots).map(|k| format!("rho{k}{k}")).collect();
    for j in 1..=n_dots {
        for k in (j + 1)..=n_dots {
            out.push(format!("re_rho{j}{k}"));
            out.push(format!("im_rho{j}{k}"));
        }
    }
    out
}

pub fn action_labels(n_dots: usize) -> Vec<String> {
    if n_dots == 3 {
        vec!["omega12".into(), "omega23".into()]
    } else {
        vec!["omega_left".into(), "omega_middle".into(), "omega_right".into()]
    }
}

/// The `N²` real degrees of freedom of the dot block.
pub fn state_features(rho: &DensityMatrix) -> Vec<f64> {
    let n = rho.n_dots();
    let mut out = rho.populations();
    for j in 1..=n {
        for k in (j + 1)..=n {
            let c = rho.coherence(j, k);
            out.push(c.re);
            out.push(c.im);
        }
    }
    out
}

/// `α(−1 + ρ33 − ρ22) − exp(β ρ22)`; at best −1 per step.
pub fn reward_ctap3(rho: &DensityMatrix, alpha: f64, beta: f64) -> f64 {
    let p22 = rho.population(2);
    let p33 = rho.population(3);
    alpha * (-1.0 + p33 - p22) - libm::exp(beta * p22)
}

/// `−(1 − ρ55)`: zero at perfect transfer, negative otherwise.
pub fn reward_sctap5(rho: &DensityMatrix) -> f64 {
    -(1.0 - rho.population(5))
}

/// Diagnostics attached to each transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Number of steps taken so far in the episode.
    pub step: usize,
    pub populations: Vec<f64>,
    pub vacuum_population: f64,
    pub trace: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Single-threaded episodic environment.
#[derive(Clone, Debug)]
pub struct CtapEnv {
    config: ScenarioConfig,
    model: MasterEquationModel,
    rho: DensityMatrix,
    prev_action: Vec<f64>,
    steps_taken: usize,
    streak: usize,
    done: bool,
}

impl CtapEnv {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        let rho = DensityMatrix::localized(&model, 1)?;
        let prev_action = vec![0.0; config.action_dim()];
        Ok(Self { config, model, rho, prev_action, steps_taken: 0, streak: 0, done: false })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn model(&self) -> &MasterEquationModel {
        &self.model
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn prev_action(&self) -> &[f64] {
        &self.prev_action
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Puts the electron back on dot 1 with all couplings off. The dynamics
    /// are deterministic, so `_seed` has no effect yet.
    pub fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.rho = DensityMatrix::localized(&self.model, 1).expect("dot 1 exists");
        self.prev_action.iter_mut().for_each(|a| *a = 0.0);
        self.steps_taken = 0;
        self.streak = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut obs = match self.config.observation_mode {
            ObservationMode::Full => state_features(&self.rho),
            ObservationMode::Reduced => (2..=self.model.n_dots()).map(|k| self.rho.population(k)).collect(),
        };
        obs.extend(self.prev_action.iter().map(|a| a / OMEGA_MAX));
        obs
    }

    pub fn reward(&self, rho: &DensityMatrix) -> f64 {
        if self.config.n_dots == 3 {
            reward_ctap3(rho, self.config.alpha, self.config.beta)
        } else {
            reward_sctap5(rho)
        }
    }

    /// Applies `action` (clipped to `[0, Ω_max]`) for one control interval.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Protocol("step called on a finished episode"));
        }
        if action.len() != self.config.action_dim() {
            return Err(Error::DimensionMismatch { expected: self.config.action_dim(), found: action.len() });
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(Error::invalid("action contains NaN"));
        }
        let controls: Vec<f64> = action.iter().map(|a| a.clamp(0.0, OMEGA_MAX)).collect();
        let next = propagate(&self.model, &self.rho, &controls, self.config.dt(), self.config.method())
            .map_err(|e| with_step(e, self.steps_taken))?;
        next.validate_at(self.steps_taken)?;
        self.rho = next;
        self.prev_action = controls;
        self.steps_taken += 1;

        let reward = self.reward(&self.rho);
        match self.config.rho33_threshold {
            Some(th) if self.rho.fidelity() > th => self.streak += 1,
            _ => self.streak = 0,
        }
        self.done = self.steps_taken >= self.config.n_steps || self.streak >= self.config.patience;

        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                step: self.steps_taken,
                populations: self.rho.populations(),
                vacuum_population: self.rho.vacuum_population(),
                trace: self.rho.trace(),
            },
        })
    }
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::NumericalInstability { reason, .. } => Error::NumericalInstability { step, reason },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(mode: ObservationMode) -> CtapEnv {
        CtapEnv::new(ScenarioConfig { observation_mode: mode, ..Default::default() }).unwrap()
    }

    #[test]
    fn reset_observations() {
        let mut e = env(ObservationMode::Full);
        assert_eq!(e.reset(0), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut e = env(ObservationMode::Reduced);
        assert_eq!(e.reset(0), vec![0.0; 4]);
        let mut e = CtapEnv::new(ScenarioConfig { n_dots: 5, ..Default::default() }).unwrap();
        assert_eq!(e.reset(0).len(), 28);
        assert_eq!(e.config().observation_labels().len(), 28);
    }

    #[test]
    fn idle_step_reward() {
        let mut e = env(ObservationMode::Full);
        let before = e.reset(0);
        let r = e.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.observation, before);
        assert_eq!(r.reward, -2.0);
        assert_eq!(r.info.step, 1);
        assert!(!r.done);
    }

    #[test]
    fn reward_values() {
        let m = MasterEquationModel::ideal(3).unwrap();
        let on3 = DensityMatrix::localized(&m, 3).unwrap();
        let on1 = DensityMatrix::localized(&m, 1).unwrap();
        let on2 = DensityMatrix::localized(&m, 2).unwrap();
        assert_eq!(reward_ctap3(&on3, 1.0, 4.0), -1.0);
        assert_eq!(reward_ctap3(&on1, 1.0, 4.0), -2.0);
        assert!((reward_ctap3(&on2, 2.0, 1.0) - (-4.0 - core::f64::consts::E)).abs() < 1e-12);

        let m5 = MasterEquationModel::ideal(5).unwrap();
        assert_eq!(reward_sctap5(&DensityMatrix::localized(&m5, 5).unwrap()), 0.0);
        assert_eq!(reward_sctap5(&DensityMatrix::localized(&m5, 1).unwrap()), -1.0);
    }

    #[test]
    fn protocol_errors() {
        let mut e = CtapEnv::new(ScenarioConfig { n_steps: 2, ..Default::default() }).unwrap();
        e.reset(0);
        assert!(matches!(e.step(&[f64::NAN, 0.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(e.step(&[0.0]), Err(Error::DimensionMismatch { .. })));
        e.step(&[0.0, 0.0]).unwrap();
        assert!(e.step(&[0.0, 0.0]).unwrap().done);
        assert!(matches!(e.step(&[0.0, 0.0]), Err(Error::Protocol(_))));
    }

    #[test]
    fn actions_are_clipped() {
        let mut e = env(ObservationMode::Reduced);
        e.reset(0);
        let r = e.step(&[1.7, -0.4]).unwrap();
        assert_eq!(&r.observation[2..], &[1.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let bad = [
            ScenarioConfig { n_dots: 4, ..Default::default() },
            ScenarioConfig { n_steps: 1, ..Default::default() },
            ScenarioConfig { alpha: 0.0, ..Default::default() },
            ScenarioConfig { gamma_d: -0.1, ..Default::default() },
            ScenarioConfig { rho33_threshold: Some(1.5), ..Default::default() },
            ScenarioConfig { patience: 0, ..Default::default() },
            ScenarioConfig { n_dots: 5, delta12: 0.1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(CtapEnv::new(cfg).is_err());
        }
    }

    #[test]
    fn labels_match_layout() {
        let cfg = ScenarioConfig::default();
        assert_eq!(
            cfg.observation_labels(),
            ["rho11", "rho22", "rho33", "re_rho12", "im_rho12", "re_rho13", "im_rho13", "re_rho23", "im_rho23", "omega12_prev", "omega23_prev"]
        );
        let cfg = ScenarioConfig { observation_mode: ObservationMode::Reduced, ..cfg };
        assert_eq!(cfg.observation_labels(), ["rho22", "rho33", "omega12_prev", "omega23_prev"]);
    }
}
