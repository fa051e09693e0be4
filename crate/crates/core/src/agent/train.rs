//! Training loop, deterministic evaluation and checkpoints.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::mlp::Mlp;
use super::policy::GaussianPolicy;
use super::rollout::{Episode, RolloutBatch};
use super::trpo::{trpo_update, TrpoConfig, ValueBaseline};
use crate::env::{CtapEnv, ScenarioConfig};
use crate::linalg::Rng;
use crate::pulses::{moving_average, spline_resample, PulseSchedule};
use crate::quantum::{evolve, DensityMatrix, Trajectory};
use crate::{Error, Result};

/// Post-processing applied to a greedy schedule before re-simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothing {
    None,
    /// Centred moving average with the given window.
    MovingAverage(usize),
    /// Natural cubic spline through the step values, resampled four times finer.
    Spline,
}

impl Smoothing {
    /// Parses `none`, `spline` or `ma<k>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Smoothing::None),
            "spline" => Ok(Smoothing::Spline),
            _ => s
                .strip_prefix("ma")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Smoothing::MovingAverage)
                .ok_or_else(|| Error::invalid(format!("unknown smoothing `{s}` (expected none, ma<k> or spline)"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Smoothing::None => "none".into(),
            Smoothing::MovingAverage(k) => format!("ma{k}"),
            Smoothing::Spline => "spline".into(),
        }
    }

    pub fn apply(&self, schedule: &PulseSchedule) -> Result<PulseSchedule> {
        match *self {
            Smoothing::None => Ok(schedule.clone()),
            Smoothing::MovingAverage(w) => moving_average(schedule, w.min(schedule.n_steps())),
            Smoothing::Spline => spline_resample(schedule, 4 * schedule.n_steps()),
        }
    }
}

/// Anything that picks couplings greedily from observations.
pub trait Controller {
    fn action(&self, step: usize, observation: &[f64]) -> Result<Vec<f64>>;
}

impl Controller for GaussianPolicy {
    fn action(&self, _step: usize, observation: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(observation)?.0)
    }
}

/// Replays a fixed schedule regardless of the observations.
#[derive(Clone, Debug)]
pub struct ScheduleController(pub PulseSchedule);

impl Controller for ScheduleController {
    fn action(&self, step: usize, _observation: &[f64]) -> Result<Vec<f64>> {
        if step >= self.0.n_steps() {
            return Err(Error::DimensionMismatch { expected: self.0.n_steps(), found: step + 1 });
        }
        Ok(self.0.controls_at(step))
    }
}

/// Runs `controller` in the environment and returns the applied (clipped)
/// schedule. Steps after an early stop are filled with zero couplings.
pub fn greedy_schedule(controller: &dyn Controller, config: &ScenarioConfig) -> Result<PulseSchedule> {
    let mut env = CtapEnv::new(config.clone())?;
    let mut obs = env.reset(0);
    let mut steps = Vec::with_capacity(config.n_steps);
    while !env.is_done() {
        let a = controller.action(env.steps_taken(), &obs)?;
        obs = env.step(&a)?.observation;
        steps.push(env.prev_action().to_vec());
    }
    steps.resize(config.n_steps, vec![0.0; config.action_dim()]);
    PulseSchedule::from_steps(config.t_max, &steps)
}

/// Figures of merit of one simulated schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub final_fidelity: f64,
    /// Final fidelity of the unsmoothed schedule.
    pub raw_final_fidelity: f64,
    /// Peak occupation of each interior dot (dot 2 first).
    pub max_interior: Vec<f64>,
    pub transfer_time_099: Option<f64>,
    pub trace_drift: f64,
}

impl EvalMetrics {
    pub fn max_rho22(&self) -> f64 {
        self.max_interior[0]
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub raw_schedule: PulseSchedule,
    pub schedule: PulseSchedule,
    pub trajectory: Trajectory,
    pub metrics: EvalMetrics,
}

pub fn simulate(schedule: &PulseSchedule, config: &ScenarioConfig) -> Result<Trajectory> {
    let model = config.model()?;
    evolve(&model, schedule, &DensityMatrix::localized(&model, 1)?, config.method())
}

/// Greedy rollout, optional smoothing, and re-simulation of the result.
pub fn evaluate(controller: &dyn Controller, config: &ScenarioConfig, smoothing: Smoothing) -> Result<Evaluation> {
    let raw_schedule = greedy_schedule(controller, config)?;
    let raw = simulate(&raw_schedule, config)?;
    let (schedule, trajectory) = match smoothing {
        Smoothing::None => (raw_schedule.clone(), raw.clone()),
        s => {
            let sched = s.apply(&raw_schedule)?;
            let traj = simulate(&sched, config)?;
            (sched, traj)
        }
    };
    let metrics = EvalMetrics {
        final_fidelity: trajectory.final_fidelity(),
        raw_final_fidelity: raw.final_fidelity(),
        max_interior: (2..config.n_dots).map(|k| trajectory.max_population(k)).collect(),
        transfer_time_099: trajectory.time_to_fidelity(0.99),
        trace_drift: trajectory.trace_drift(),
    };
    Ok(Evaluation { raw_schedule, schedule, trajectory, metrics })
}

/// Saved policy with enough context to check compatibility and resume.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyCheckpoint {
    pub policy: GaussianPolicy,
    pub value_net: Option<Mlp>,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub epoch: usize,
    pub metrics: Option<EvalMetrics>,
}

/// Tag naming the observation layout a policy was trained on.
pub fn obs_layout(config: &ScenarioConfig) -> String {
    format!("{}-{}dot", config.observation_mode.as_str(), config.n_dots)
}

impl PolicyCheckpoint {
    pub fn obs_layout(&self) -> String {
        obs_layout(&self.scenario)
    }

    /// Errors unless the policy can act in `config`.
    pub fn check_compatible(&self, config: &ScenarioConfig) -> Result<()> {
        if self.policy.obs_dim() != config.observation_dim() {
            return Err(Error::DimensionMismatch { expected: config.observation_dim(), found: self.policy.obs_dim() });
        }
        if self.policy.action_dim() != config.action_dim() {
            return Err(Error::DimensionMismatch { expected: config.action_dim(), found: self.policy.action_dim() });
        }
        if self.obs_layout() != obs_layout(config) {
            return Err(Error::invalid(format!(
                "checkpoint observes `{}` but the scenario provides `{}`",
                self.obs_layout(),
                obs_layout(config)
            )));
        }
        Ok(())
    }
}

/// Collects the episodes of one batch. Implementations must return them in
/// the order of `seeds` so results do not depend on scheduling.
pub trait EpisodeRunner {
    fn run(&self, config: &ScenarioConfig, policy: &GaussianPolicy, value: &ValueBaseline, seeds: &[u64]) -> Result<Vec<Episode>>;
}

/// Runs episodes one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct SerialRunner;

impl EpisodeRunner for SerialRunner {
    fn run(&self, config: &ScenarioConfig, policy: &GaussianPolicy, value: &ValueBaseline, seeds: &[u64]) -> Result<Vec<Episode>> {
        let mut env = CtapEnv::new(config.clone())?;
        seeds.iter().map(|&s| collect_episode(&mut env, policy, value, s)).collect()
    }
}

/// One stochastic episode; all randomness comes from `seed`.
pub fn collect_episode(env: &mut CtapEnv, policy: &GaussianPolicy, value: &ValueBaseline, seed: u64) -> Result<Episode> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut obs = env.reset(seed);
    let mut ep = Episode::default();
    let mut max_rho22: f64 = 0.0;
    while !env.is_done() {
        let (a, lp) = policy.sample_action(&obs, &mut rng)?;
        let v = value.predict(&obs)?;
        let r = env.step(&a)?;
        max_rho22 = max_rho22.max(env.state().population(2));
        ep.observations.push(core::mem::replace(&mut obs, r.observation));
        ep.actions.push(a);
        ep.log_probs.push(lp);
        ep.values.push(v);
        ep.rewards.push(r.reward);
    }
    ep.final_fidelity = env.state().fidelity();
    ep.max_rho22 = max_rho22;
    Ok(ep)
}

/// Everything `train` needs besides the runner.
#[derive(Clone, Debug)]
pub struct TrainSetup {
    pub scenario: ScenarioConfig,
    pub trpo: TrpoConfig,
    pub hidden: Vec<usize>,
    /// Smoothing used when scoring the greedy policy after each epoch.
    pub eval_smoothing: Smoothing,
    pub warm_start: Option<PolicyCheckpoint>,
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_return: f64,
    pub mean_final_fidelity: f64,
    /// Batch mean of the per-episode peak of dot 2.
    pub max_rho22: f64,
    pub kl: f64,
    pub accepted: bool,
    pub eval_final_fidelity: f64,
    pub eval_max_rho22: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Checkpoint with the highest evaluated final fidelity seen so far.
    pub best: PolicyCheckpoint,
    pub last: PolicyCheckpoint,
    pub log: Vec<EpochRecord>,
}

/// Runs up to `trpo.total_epochs` epochs. `observer` sees every epoch and
/// the updated policy and may end training early.
pub fn train(
    setup: &TrainSetup,
    runner: &dyn EpisodeRunner,
    observer: &mut dyn FnMut(&EpochRecord, &GaussianPolicy) -> Control,
) -> Result<TrainOutcome> {
    let cfg = &setup.trpo;
    cfg.validate()?;
    setup.scenario.validate()?;
    let mut master = Rng::seed_from_u64(cfg.seed);
    let mut init_rng = master.fork();
    let mut fit_rng = master.fork();

    let obs_dim = setup.scenario.observation_dim();
    let act_dim = setup.scenario.action_dim();
    let (mut policy, mut value) = match &setup.warm_start {
        Some(ck) => {
            ck.check_compatible(&setup.scenario)?;
            let value = match &ck.value_net {
                Some(net) => ValueBaseline::pretrained(net.clone())?,
                None => ValueBaseline::new(Mlp::random(&value_dims(obs_dim, &setup.hidden), 1.0, &mut init_rng)?)?,
            };
            (ck.policy.clone(), value)
        }
        None => (
            GaussianPolicy::random(obs_dim, &setup.hidden, act_dim, cfg.log_std_init, &mut init_rng)?,
            ValueBaseline::new(Mlp::random(&value_dims(obs_dim, &setup.hidden), 1.0, &mut init_rng)?)?,
        ),
    };

    let snapshot = |policy: &GaussianPolicy, value: &ValueBaseline, epoch: usize, metrics: EvalMetrics| PolicyCheckpoint {
        policy: policy.clone(),
        value_net: Some(value.net().clone()),
        scenario: setup.scenario.clone(),
        seed: cfg.seed,
        epoch,
        metrics: Some(metrics),
    };
    let initial = evaluate(&policy, &setup.scenario, setup.eval_smoothing)?.metrics;
    let mut best = snapshot(&policy, &value, 0, initial.clone());
    let mut last_metrics = initial;
    let mut log = Vec::new();

    for epoch in 1..=cfg.total_epochs {
        let seeds: Vec<u64> = (0..cfg.episodes_per_batch).map(|_| master.next_u64()).collect();
        let batch = RolloutBatch { episodes: runner.run(&setup.scenario, &policy, &value, &seeds)? };
        let stats = trpo_update(&mut policy, &mut value, &batch, cfg, &mut fit_rng)?;
        debug_assert!(!stats.accepted || stats.kl <= cfg.max_kl);
        let metrics = evaluate(&policy, &setup.scenario, setup.eval_smoothing)?.metrics;
        let record = EpochRecord {
            epoch,
            mean_return: batch.mean_return(),
            mean_final_fidelity: batch.mean_final_fidelity(),
            max_rho22: batch.mean_max_rho22(),
            kl: stats.kl,
            accepted: stats.accepted,
            eval_final_fidelity: metrics.final_fidelity,
            eval_max_rho22: metrics.max_rho22(),
        };
        if metrics.final_fidelity > best.metrics.as_ref().map_or(f64::NEG_INFINITY, |m| m.final_fidelity) {
            best = snapshot(&policy, &value, epoch, metrics.clone());
        }
        last_metrics = metrics;
        let control = observer(&record, &policy);
        log.push(record);
        if control == Control::Stop {
            break;
        }
    }
    let last = snapshot(&policy, &value, log.len(), last_metrics);
    Ok(TrainOutcome { best, last, log })
}

fn value_dims(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = vec![obs_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims
}
