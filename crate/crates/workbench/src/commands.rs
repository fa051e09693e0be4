//! The four subcommands. Each writes its outputs into one run directory
//! and records them, with the resolved configuration, in the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ctap_core::agent::{
    evaluate, train, Control, Evaluation, PolicyCheckpoint, ScheduleController, Smoothing, TrainSetup,
};
use ctap_core::analysis::{build_2tbn, collect_transitions, export_dot, Behaviour, DependencyGraph, ForestConfig, TbnConfig};
use ctap_core::env::ScenarioConfig;
use ctap_core::pulses::{gaussian_ctap_pair, gaussian_sctap, PulseOrder, PulseSchedule};
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint, ScenarioEcho};
use crate::config::{load_scenario, load_training, Scenario, Training, TrainFile};
use crate::csv_io::{read_dataset, write_dataset, write_schedule, write_training_log, write_trajectory};
use crate::error::{Result, WorkbenchError};
use crate::manifest::RunManifest;
use crate::runner::ThreadedRunner;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const SCHEDULE_CSV: &str = "schedule.csv";
pub const RAW_SCHEDULE_CSV: &str = "raw_schedule.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";
pub const LAST_CHECKPOINT_JSON: &str = "checkpoint_last.json";
pub const TRAINING_LOG_CSV: &str = "training_log.csv";
pub const DATASET_CSV: &str = "dataset.csv";
pub const GRAPH_DOT: &str = "graph.dot";
pub const RELEVANCE_TXT: &str = "relevance.txt";

/// Figures of merit written to `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub final_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<String>,
    pub max_rho22: f64,
    /// Peak occupation of every interior dot, dot 2 first.
    pub max_interior: Vec<f64>,
    #[serde(rename = "transfer_time_to_0.99")]
    pub transfer_time_099: Option<f64>,
    #[serde(rename = "transfer_time_to_0.9")]
    pub transfer_time_09: Option<f64>,
    pub trace_drift: f64,
    /// Total dot occupation at `t_max` (below 1 under loss).
    pub final_dot_trace: f64,
}

impl MetricsReport {
    fn from_evaluation(e: &Evaluation, smoothing: Option<Smoothing>) -> Self {
        let m = &e.metrics;
        Self {
            final_fidelity: m.final_fidelity,
            raw_final_fidelity: smoothing.map(|_| m.raw_final_fidelity),
            smoothing: smoothing.map(|s| s.label()),
            max_rho22: m.max_rho22(),
            max_interior: m.max_interior.clone(),
            transfer_time_099: m.transfer_time_099,
            transfer_time_09: e.trajectory.time_to_fidelity(0.9),
            trace_drift: m.trace_drift,
            final_dot_trace: e.trajectory.final_state().dot_trace(),
        }
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| WorkbenchError::io(&path, e))?;
    manifest.outputs.push(name.into());
    Ok(())
}

fn record(manifest: &mut RunManifest, name: &str) {
    manifest.outputs.push(name.into());
}

/// The Gaussian reference pulses for a scenario: counter-intuitive pair for
/// three dots, straddling scheme for five.
pub fn baseline_schedule(s: &Scenario) -> ctap_core::Result<PulseSchedule> {
    let c = &s.config;
    if c.n_dots == 3 {
        gaussian_ctap_pair(c.t_max, c.n_steps, PulseOrder::CounterIntuitive, s.shape)
    } else {
        gaussian_sctap(c.t_max, c.n_steps, s.shape, s.middle_scale)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
}

pub fn cmd_baseline(args: &BaselineArgs, manifest: &mut RunManifest) -> Result<()> {
    let scenario = load_scenario(&args.config)?;
    manifest.config = serde_json::json!({ "scenario": ScenarioEcho::from(&scenario.config), "shape": {
        "width_fraction": scenario.shape.width_fraction,
        "separation_fraction": scenario.shape.separation_fraction,
        "middle_scale": scenario.middle_scale,
    }});
    let schedule = baseline_schedule(&scenario)?;
    let e = evaluate(&ScheduleController(schedule), &scenario.config, Smoothing::None)?;
    write_trajectory(&args.out.join(TRAJECTORY_CSV), &e.trajectory)?;
    record(manifest, TRAJECTORY_CSV);
    write_schedule(&args.out.join(SCHEDULE_CSV), &e.schedule)?;
    record(manifest, SCHEDULE_CSV);
    write_json(&args.out, METRICS_JSON, &MetricsReport::from_evaluation(&e, None), manifest)
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub trpo_config: Option<PathBuf>,
    pub warm_start: Option<PathBuf>,
    pub max_wall_secs: Option<f64>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// `completed`, `target_reached` or `wall_clock`.
    pub stop_reason: String,
    pub accepted_updates: usize,
    pub max_accepted_kl: f64,
    pub best: Option<MetricsReport>,
}

fn checkpoint_report(ck: &PolicyCheckpoint, smoothing: Smoothing) -> Result<MetricsReport> {
    let e = evaluate(&ck.policy, &ck.scenario, smoothing)?;
    Ok(MetricsReport::from_evaluation(&e, Some(smoothing)))
}

pub fn cmd_train(args: &TrainArgs, manifest: &mut RunManifest) -> Result<()> {
    let scenario = load_scenario(&args.config)?;
    let mut training: Training = match &args.trpo_config {
        Some(p) => load_training(p)?,
        None => TrainFile::default().resolve().map_err(WorkbenchError::Usage)?,
    };
    if let Some(seed) = args.seed {
        training.trpo.seed = seed;
    }
    manifest.seed = training.trpo.seed;
    let warm_start = args.warm_start.as_deref().map(load_checkpoint).transpose()?;
    if let Some(ck) = &warm_start {
        ck.check_compatible(&scenario.config)?;
    }
    manifest.config = serde_json::json!({
        "scenario": ScenarioEcho::from(&scenario.config),
        "training": TrainFile::from(&training),
        "warm_start": args.warm_start,
        "max_wall_secs": args.max_wall_secs,
    });

    let setup = TrainSetup {
        scenario: scenario.config.clone(),
        trpo: training.trpo.clone(),
        hidden: training.hidden.clone(),
        eval_smoothing: training.eval_smoothing,
        warm_start,
    };
    let started = Instant::now();
    let mut stop_reason = "completed";
    let mut best_so_far: Option<(f64, f64)> = None;
    let outcome = train(&setup, &ThreadedRunner::from_env(), &mut |r, _| {
        if best_so_far.is_none_or(|(f, _)| r.eval_final_fidelity > f) {
            best_so_far = Some((r.eval_final_fidelity, r.eval_max_rho22));
        }
        if let (Some(stop), Some((f, m))) = (training.stop, best_so_far) {
            if f >= stop.fidelity && m <= stop.max_rho22 {
                stop_reason = "target_reached";
                return Control::Stop;
            }
        }
        if args.max_wall_secs.is_some_and(|limit| started.elapsed().as_secs_f64() >= limit) {
            stop_reason = "wall_clock";
            return Control::Stop;
        }
        Control::Continue
    })?;
    save_checkpoint(&args.out.join(CHECKPOINT_JSON), &outcome.best)?;
    record(manifest, CHECKPOINT_JSON);
    save_checkpoint(&args.out.join(LAST_CHECKPOINT_JSON), &outcome.last)?;
    record(manifest, LAST_CHECKPOINT_JSON);
    write_training_log(&args.out.join(TRAINING_LOG_CSV), &outcome.log)?;
    record(manifest, TRAINING_LOG_CSV);
    let accepted: Vec<f64> = outcome.log.iter().filter(|r| r.accepted).map(|r| r.kl).collect();
    let report = TrainReport {
        epochs_run: outcome.log.len(),
        best_epoch: outcome.best.epoch,
        stop_reason: stop_reason.into(),
        accepted_updates: accepted.len(),
        max_accepted_kl: accepted.iter().copied().fold(0.0, f64::max),
        best: Some(checkpoint_report(&outcome.best, training.eval_smoothing)?),
    };
    write_json(&args.out, METRICS_JSON, &report, manifest)
}

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub config: Option<PathBuf>,
    pub smoothing: Smoothing,
    pub out: PathBuf,
    pub seed: u64,
}

/// Scenario from `--config`, or the one echoed in the checkpoint.
fn scenario_for(config: Option<&Path>, ck: Option<&PolicyCheckpoint>) -> Result<ScenarioConfig> {
    match (config, ck) {
        (Some(p), _) => Ok(load_scenario(p)?.config),
        (None, Some(ck)) => Ok(ck.scenario.clone()),
        (None, None) => Ok(ScenarioConfig::default()),
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, manifest: &mut RunManifest) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let scenario = scenario_for(args.config.as_deref(), Some(&ck))?;
    ck.check_compatible(&scenario)?;
    manifest.config = serde_json::json!({
        "scenario": ScenarioEcho::from(&scenario),
        "checkpoint": args.checkpoint,
        "smoothing": args.smoothing.label(),
    });
    let e = evaluate(&ck.policy, &scenario, args.smoothing)?;
    write_schedule(&args.out.join(RAW_SCHEDULE_CSV), &e.raw_schedule)?;
    record(manifest, RAW_SCHEDULE_CSV);
    write_schedule(&args.out.join(SCHEDULE_CSV), &e.schedule)?;
    record(manifest, SCHEDULE_CSV);
    write_trajectory(&args.out.join(TRAJECTORY_CSV), &e.trajectory)?;
    record(manifest, TRAJECTORY_CSV);
    write_json(&args.out, METRICS_JSON, &MetricsReport::from_evaluation(&e, Some(args.smoothing)), manifest)
}

/// Where analysed transitions come from.
#[derive(Clone, Debug)]
pub enum AnalysisSource {
    Checkpoint(PathBuf),
    Random,
    Dataset(PathBuf),
}

#[derive(Clone, Debug)]
pub struct AnalyzeArgs {
    pub source: AnalysisSource,
    pub config: Option<PathBuf>,
    pub n_samples: usize,
    pub epsilon: f64,
    pub exploration_std: f64,
    pub out: PathBuf,
    pub seed: u64,
}

/// Plain-text summary of the graph: relevant and prunable variables,
/// reward parents, every edge and each target's fit quality.
pub fn relevance_report(g: &DependencyGraph) -> String {
    let mut s = String::new();
    let prunable = g.prunable();
    let _ = writeln!(s, "relevant: {}", g.relevant.join(" "));
    let _ = writeln!(s, "prunable: {}", prunable.join(" "));
    let _ = writeln!(s, "redundant: {}", g.redundant.join(" "));
    let _ = writeln!(s, "reward_parents: {}", g.parents("reward").join(" "));
    let _ = writeln!(s, "\n# edges: source target importance");
    for e in &g.edges {
        let _ = writeln!(s, "{} {} {:.6}", e.source, e.target, e.weight);
    }
    let _ = writeln!(s, "\n# fit: target oob_r2");
    for (t, r2) in &g.fit_quality {
        let _ = writeln!(s, "{t} {r2:.6}");
    }
    s
}

pub fn cmd_analyze(args: &AnalyzeArgs, manifest: &mut RunManifest) -> Result<DependencyGraph> {
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(WorkbenchError::Usage("--epsilon must lie in (0, 1)".into()));
    }
    let mut scenario_echo = None;
    let dataset = match &args.source {
        AnalysisSource::Dataset(p) => read_dataset(p)?,
        source => {
            let ck = match source {
                AnalysisSource::Checkpoint(p) => Some(load_checkpoint(p)?),
                _ => None,
            };
            let scenario = scenario_for(args.config.as_deref(), ck.as_ref())?;
            let behaviour = match &ck {
                Some(ck) => {
                    ck.check_compatible(&scenario)?;
                    Behaviour::Controller(&ck.policy)
                }
                None => Behaviour::Random,
            };
            scenario_echo = Some(ScenarioEcho::from(&scenario));
            let ds = collect_transitions(&scenario, behaviour, args.n_samples, args.seed, args.exploration_std)?;
            write_dataset(&args.out.join(DATASET_CSV), &ds)?;
            record(manifest, DATASET_CSV);
            ds
        }
    };
    let source = match &args.source {
        AnalysisSource::Checkpoint(p) => format!("checkpoint {}", p.display()),
        AnalysisSource::Random => "random".into(),
        AnalysisSource::Dataset(p) => format!("dataset {}", p.display()),
    };
    manifest.config = serde_json::json!({
        "scenario": scenario_echo,
        "source": source,
        "n_samples": dataset.n_rows(),
        "epsilon": args.epsilon,
        "exploration_std": args.exploration_std,
    });

    let cfg = TbnConfig {
        epsilon: args.epsilon,
        forest: ForestConfig { seed: args.seed, ..ForestConfig::default() },
        ..TbnConfig::default()
    };
    let graph = build_2tbn(&dataset, &cfg)?;
    let dot = args.out.join(GRAPH_DOT);
    std::fs::write(&dot, export_dot(&graph)).map_err(|e| WorkbenchError::io(&dot, e))?;
    record(manifest, GRAPH_DOT);
    let txt = args.out.join(RELEVANCE_TXT);
    std::fs::write(&txt, relevance_report(&graph)).map_err(|e| WorkbenchError::io(&txt, e))?;
    record(manifest, RELEVANCE_TXT);
    Ok(graph)
}
