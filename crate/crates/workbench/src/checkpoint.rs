//! Versioned JSON checkpoints.

use std::f64::consts::PI;
use std::path::Path;

use ctap_core::agent::{EvalMetrics, GaussianPolicy, Mlp, PolicyCheckpoint};
use ctap_core::env::{Integrator, ObservationMode, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub layer_dims: Vec<usize>,
    /// Per layer, row-major `n_out × n_in`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetworkFile {
    fn from_mlp(net: &Mlp) -> Self {
        Self {
            layer_dims: net.layer_dims(),
            weights: (0..net.n_layers()).map(|l| net.layer_weights(l).to_vec()).collect(),
            biases: (0..net.n_layers()).map(|l| net.layer_biases(l).to_vec()).collect(),
        }
    }

    fn to_mlp(&self) -> ctap_core::Result<Mlp> {
        Mlp::from_parts(&self.layer_dims, self.weights.clone(), self.biases.clone())
    }
}

/// Scenario the policy was trained on; `t_max` is kept in natural units so
/// it round-trips exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEcho {
    pub n_dots: usize,
    pub t_max: f64,
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
}

impl From<&ScenarioConfig> for ScenarioEcho {
    fn from(c: &ScenarioConfig) -> Self {
        Self {
            n_dots: c.n_dots,
            t_max: c.t_max,
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
        }
    }
}

impl ScenarioEcho {
    pub fn to_config(&self) -> ctap_core::Result<ScenarioConfig> {
        let c = ScenarioConfig {
            n_dots: self.n_dots,
            t_max: self.t_max,
            n_steps: self.n_steps,
            delta12: self.delta12,
            delta23: self.delta23,
            gamma_d: self.gamma_d,
            gamma_l: self.gamma_l,
            alpha: self.alpha,
            beta: self.beta,
            rho33_threshold: self.rho33_threshold,
            patience: self.patience,
            observation_mode: ObservationMode::parse(&self.observation_mode)?,
            integrator: Integrator::parse(&self.integrator)?,
            n_substeps: self.n_substeps,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub final_fidelity: f64,
    pub raw_final_fidelity: f64,
    pub max_interior: Vec<f64>,
    #[serde(rename = "transfer_time_to_0.99")]
    pub transfer_time_099: Option<f64>,
    pub trace_drift: f64,
}

impl From<&EvalMetrics> for MetricsFile {
    fn from(m: &EvalMetrics) -> Self {
        Self {
            final_fidelity: m.final_fidelity,
            raw_final_fidelity: m.raw_final_fidelity,
            max_interior: m.max_interior.clone(),
            transfer_time_099: m.transfer_time_099,
            trace_drift: m.trace_drift,
        }
    }
}

impl From<&MetricsFile> for EvalMetrics {
    fn from(m: &MetricsFile) -> Self {
        Self {
            final_fidelity: m.final_fidelity,
            raw_final_fidelity: m.raw_final_fidelity,
            max_interior: m.max_interior.clone(),
            transfer_time_099: m.transfer_time_099,
            trace_drift: m.trace_drift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub version: u32,
    pub obs_layout: String,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub log_std: Vec<f64>,
    pub value_net: Option<NetworkFile>,
    pub env_config: ScenarioEcho,
    pub seed: u64,
    pub epoch: usize,
    pub metrics: Option<MetricsFile>,
}

impl From<&PolicyCheckpoint> for CheckpointFile {
    fn from(ck: &PolicyCheckpoint) -> Self {
        let mean = NetworkFile::from_mlp(ck.policy.mean_net());
        Self {
            version: CHECKPOINT_VERSION,
            obs_layout: ck.obs_layout(),
            layer_dims: mean.layer_dims,
            weights: mean.weights,
            biases: mean.biases,
            log_std: ck.policy.log_std().to_vec(),
            value_net: ck.value_net.as_ref().map(NetworkFile::from_mlp),
            env_config: ScenarioEcho::from(&ck.scenario),
            seed: ck.seed,
            epoch: ck.epoch,
            metrics: ck.metrics.as_ref().map(MetricsFile::from),
        }
    }
}

impl CheckpointFile {
    pub fn to_checkpoint(&self) -> std::result::Result<PolicyCheckpoint, String> {
        if self.version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})", self.version));
        }
        let mean = NetworkFile { layer_dims: self.layer_dims.clone(), weights: self.weights.clone(), biases: self.biases.clone() };
        let policy = GaussianPolicy::new(mean.to_mlp().map_err(|e| e.to_string())?, self.log_std.clone()).map_err(|e| e.to_string())?;
        let value_net = self.value_net.as_ref().map(|n| n.to_mlp()).transpose().map_err(|e| format!("value_net: {e}"))?;
        let scenario = self.env_config.to_config().map_err(|e| format!("env_config: {e}"))?;
        let ck = PolicyCheckpoint {
            policy,
            value_net,
            scenario,
            seed: self.seed,
            epoch: self.epoch,
            metrics: self.metrics.as_ref().map(EvalMetrics::from),
        };
        if ck.obs_layout() != self.obs_layout {
            return Err(format!("obs_layout `{}` does not match env_config (`{}`)", self.obs_layout, ck.obs_layout()));
        }
        ck.check_compatible(&ck.scenario).map_err(|e| e.to_string())?;
        Ok(ck)
    }
}

pub fn save_checkpoint(path: &Path, ck: &PolicyCheckpoint) -> Result<()> {
    let text = serde_json::to_string_pretty(&CheckpointFile::from(ck)).expect("checkpoint serializes");
    std::fs::write(path, text + "\n").map_err(|e| WorkbenchError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyCheckpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::config(path, e.to_string()))?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| WorkbenchError::config(path, e.to_string()))?;
    file.to_checkpoint().map_err(|e| WorkbenchError::config(path, e))
}
