//! Flat TOML configuration for scenarios and training.
//!
//! Every key is optional and defaults to the core library's default. Unknown
//! keys are rejected so typos surface as errors with their line and column.

use std::f64::consts::PI;
use std::path::Path;

use ctap_core::agent::{Smoothing, TrpoConfig};
use ctap_core::env::{Integrator, ObservationMode, ScenarioConfig};
use ctap_core::pulses::GaussianShape;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

/// Scenario file: physics, reward, episode protocol and baseline pulse shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub n_dots: usize,
    pub t_max_pi_units: f64,
    pub n_steps: usize,
    pub delta12: f64,
    pub delta23: f64,
    pub gamma_d: f64,
    pub gamma_l: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho33_threshold: Option<f64>,
    pub patience: usize,
    pub observation_mode: String,
    pub integrator: String,
    pub n_substeps: usize,
    pub width_fraction: f64,
    pub separation_fraction: f64,
    /// Peak of the straddling pulse relative to Ω_max (five dots only).
    pub middle_scale: f64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        let s = GaussianShape::default();
        Self {
            n_dots: c.n_dots,
            t_max_pi_units: c.t_max / PI,
            n_steps: c.n_steps,
            delta12: c.delta12,
            delta23: c.delta23,
            gamma_d: c.gamma_d,
            gamma_l: c.gamma_l,
            alpha: c.alpha,
            beta: c.beta,
            rho33_threshold: c.rho33_threshold,
            patience: c.patience,
            observation_mode: c.observation_mode.as_str().into(),
            integrator: c.integrator.as_str().into(),
            n_substeps: c.n_substeps,
            width_fraction: s.width_fraction,
            separation_fraction: s.separation_fraction,
            middle_scale: 1.0,
        }
    }
}

/// A validated scenario together with its baseline pulse parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub shape: GaussianShape,
    pub middle_scale: f64,
}

impl ScenarioFile {
    pub fn resolve(&self) -> std::result::Result<Scenario, String> {
        let config = ScenarioConfig {
            n_dots: self.n_dots,
            n_steps: self.n_steps,
            delta12: self.delta12,
            delta23: self.delta23,
            gamma_d: self.gamma_d,
            gamma_l: self.gamma_l,
            alpha: self.alpha,
            beta: self.beta,
            rho33_threshold: self.rho33_threshold,
            patience: self.patience,
            observation_mode: ObservationMode::parse(&self.observation_mode).map_err(|e| format!("observation_mode: {e}"))?,
            integrator: Integrator::parse(&self.integrator).map_err(|e| format!("integrator: {e}"))?,
            n_substeps: self.n_substeps,
            ..ScenarioConfig::default()
        }
        .with_t_max_pi_units(self.t_max_pi_units);
        config.validate().map_err(|e| e.to_string())?;
        if !(self.width_fraction > 0.0 && self.separation_fraction > 0.0 && self.separation_fraction < 1.0) {
            return Err("width_fraction must be positive and separation_fraction in (0, 1)".into());
        }
        if !(self.middle_scale >= 1.0 && self.middle_scale.is_finite()) {
            return Err("middle_scale must be at least 1".into());
        }
        let shape = GaussianShape { width_fraction: self.width_fraction, separation_fraction: self.separation_fraction };
        Ok(Scenario { config, shape, middle_scale: self.middle_scale })
    }
}

/// Training file: TRPO hyper-parameters, network shape and stop rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub discount: f64,
    pub gae_lambda: f64,
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub episodes_per_batch: usize,
    pub value_fit_epochs: usize,
    pub value_lr: f64,
    pub value_minibatch: usize,
    pub total_epochs: usize,
    pub seed: u64,
    pub log_std_init: f64,
    pub hidden_layers: Vec<usize>,
    /// Smoothing applied when scoring the greedy policy: none, ma<k> or spline.
    pub eval_smoothing: String,
    /// Stop once the best evaluated final fidelity reaches this value.
    pub target_fidelity: Option<f64>,
    /// Peak dot-2 occupation the target checkpoint may not exceed.
    pub target_max_rho22: Option<f64>,
}

impl Default for TrainFile {
    fn default() -> Self {
        let t = TrpoConfig::default();
        Self {
            discount: t.discount,
            gae_lambda: t.gae_lambda,
            max_kl: t.max_kl,
            cg_iters: t.cg_iters,
            cg_damping: t.cg_damping,
            backtrack_ratio: t.backtrack_ratio,
            max_backtracks: t.max_backtracks,
            episodes_per_batch: t.episodes_per_batch,
            value_fit_epochs: t.value_fit_epochs,
            value_lr: t.value_lr,
            value_minibatch: t.value_minibatch,
            total_epochs: t.total_epochs,
            seed: t.seed,
            log_std_init: t.log_std_init,
            hidden_layers: vec![16],
            eval_smoothing: "ma4".into(),
            target_fidelity: None,
            target_max_rho22: None,
        }
    }
}

/// Early-stop rule applied to the best checkpoint seen so far.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub fidelity: f64,
    pub max_rho22: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Training {
    pub trpo: TrpoConfig,
    pub hidden: Vec<usize>,
    pub eval_smoothing: Smoothing,
    pub stop: Option<StopRule>,
}

impl TrainFile {
    pub fn resolve(&self) -> std::result::Result<Training, String> {
        let trpo = TrpoConfig {
            discount: self.discount,
            gae_lambda: self.gae_lambda,
            max_kl: self.max_kl,
            cg_iters: self.cg_iters,
            cg_damping: self.cg_damping,
            backtrack_ratio: self.backtrack_ratio,
            max_backtracks: self.max_backtracks,
            episodes_per_batch: self.episodes_per_batch,
            value_fit_epochs: self.value_fit_epochs,
            value_lr: self.value_lr,
            value_minibatch: self.value_minibatch,
            total_epochs: self.total_epochs,
            seed: self.seed,
            log_std_init: self.log_std_init,
        };
        trpo.validate().map_err(|e| e.to_string())?;
        if self.hidden_layers.contains(&0) {
            return Err("hidden_layers entries must be positive".into());
        }
        let eval_smoothing = Smoothing::parse(&self.eval_smoothing).map_err(|e| format!("eval_smoothing: {e}"))?;
        let stop = match (self.target_fidelity, self.target_max_rho22) {
            (None, None) => None,
            (Some(f), m) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err("target_fidelity must lie in (0, 1]".into());
                }
                Some(StopRule { fidelity: f, max_rho22: m.unwrap_or(1.0) })
            }
            (None, Some(_)) => return Err("target_max_rho22 requires target_fidelity".into()),
        };
        Ok(Training { trpo, hidden: self.hidden_layers.clone(), eval_smoothing, stop })
    }
}

impl From<&Training> for TrainFile {
    fn from(t: &Training) -> Self {
        let c = &t.trpo;
        Self {
            discount: c.discount,
            gae_lambda: c.gae_lambda,
            max_kl: c.max_kl,
            cg_iters: c.cg_iters,
            cg_damping: c.cg_damping,
            backtrack_ratio: c.backtrack_ratio,
            max_backtracks: c.max_backtracks,
            episodes_per_batch: c.episodes_per_batch,
            value_fit_epochs: c.value_fit_epochs,
            value_lr: c.value_lr,
            value_minibatch: c.value_minibatch,
            total_epochs: c.total_epochs,
            seed: c.seed,
            log_std_init: c.log_std_init,
            hidden_layers: t.hidden.clone(),
            eval_smoothing: t.eval_smoothing.label(),
            target_fidelity: t.stop.map(|s| s.fidelity),
            target_max_rho22: t.stop.map(|s| s.max_rho22),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| WorkbenchError::config(path, e.to_string()))
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| WorkbenchError::config(path, e.to_string()))?;
    file.resolve().map_err(|e| WorkbenchError::config(path, e))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read(path)?, path)
}

pub fn parse_training(text: &str, path: &Path) -> Result<Training> {
    let file: TrainFile = toml::from_str(text).map_err(|e| WorkbenchError::config(path, e.to_string()))?;
    file.resolve().map_err(|e| WorkbenchError::config(path, e))
}

pub fn load_training(path: &Path) -> Result<Training> {
    parse_training(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("s.toml"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let s = scenario("").unwrap();
        let d = ScenarioConfig::default();
        assert_eq!(s.config.n_dots, d.n_dots);
        assert!((s.config.t_max - d.t_max).abs() < 1e-12);
        assert_eq!(s.shape, GaussianShape::default());
    }

    #[test]
    fn keys_are_applied() {
        let s = scenario("n_dots = 3\nt_max_pi_units = 5\ngamma_d = 0.01\nobservation_mode = \"reduced\"\nintegrator = \"rk4\"\n").unwrap();
        assert_eq!(s.config.t_max, 5.0 * PI);
        assert_eq!(s.config.gamma_d, 0.01);
        assert_eq!(s.config.observation_mode, ObservationMode::Reduced);
        assert_eq!(s.config.integrator, Integrator::Rk4);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let e = scenario("n_dots = 3\nt_maxx = 4\n").unwrap_err().to_string();
        assert!(e.contains("t_maxx"), "{e}");
        assert!(e.contains("line 2"), "{e}");
        assert_eq!(scenario("t_maxx = 4").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn wrong_type_reports_the_key() {
        let e = scenario("n_steps = \"fifty\"").unwrap_err().to_string();
        assert!(e.contains("n_steps"), "{e}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(scenario("n_dots = 4").unwrap_err().to_string().contains("n_dots"));
        assert!(scenario("observation_mode = \"partial\"").unwrap_err().to_string().contains("observation_mode"));
        assert!(scenario("t_max_pi_units = -1").is_err());
    }

    #[test]
    fn training_file() {
        let t = parse_training("total_epochs = 7\nhidden_layers = [8, 8]\neval_smoothing = \"spline\"\ntarget_fidelity = 0.95\n", Path::new("t.toml")).unwrap();
        assert_eq!(t.trpo.total_epochs, 7);
        assert_eq!(t.hidden, vec![8, 8]);
        assert_eq!(t.eval_smoothing, Smoothing::Spline);
        assert_eq!(t.stop, Some(StopRule { fidelity: 0.95, max_rho22: 1.0 }));
        assert!(parse_training("max_kl = -1", Path::new("t.toml")).is_err());
        assert!(parse_training("target_max_rho22 = 0.3", Path::new("t.toml")).is_err());
    }
}
