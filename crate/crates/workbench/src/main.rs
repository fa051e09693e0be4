use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctap_core::agent::Smoothing;
use ctap_workbench::commands::{
    cmd_analyze, cmd_baseline, cmd_evaluate, cmd_train, AnalysisSource, AnalyzeArgs, BaselineArgs, EvaluateArgs,
    TrainArgs,
};
use ctap_workbench::{run_in_dir, WorkbenchError};

/// Coherent transport by adiabatic passage: simulate, train, evaluate and
/// analyse control pulses for quantum-dot arrays.
#[derive(Debug, Parser)]
#[command(name = "ctap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed for every random choice of the run.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the Gaussian reference pulses.
    Baseline {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a policy with TRPO.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Training TOML file; defaults apply when omitted.
        #[arg(long)]
        trpo_config: Option<PathBuf>,
        /// Checkpoint to start from.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Stop after this many seconds of wall-clock time.
        #[arg(long)]
        max_wall_secs: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a checkpoint's greedy policy and simulate its pulses.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scenario TOML file; defaults to the one stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SmoothingArg::None)]
        smoothing: SmoothingArg,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the two-step dependency graph and the relevant variables.
    Analyze {
        /// Collect transitions with this checkpoint's policy.
        #[arg(long, conflicts_with_all = ["random", "dataset"])]
        checkpoint: Option<PathBuf>,
        /// Collect transitions with uniformly random couplings.
        #[arg(long, conflicts_with = "dataset")]
        random: bool,
        /// Analyse an existing dataset CSV instead of collecting one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        n_samples: usize,
        /// Importance an edge needs to be kept.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Std of the action noise added to the policy, in units of Ω_max.
        #[arg(long, default_value_t = 0.1)]
        exploration_std: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmoothingArg {
    None,
    Ma4,
    Spline,
}

impl From<SmoothingArg> for Smoothing {
    fn from(s: SmoothingArg) -> Self {
        match s {
            SmoothingArg::None => Smoothing::None,
            SmoothingArg::Ma4 => Smoothing::MovingAverage(4),
            SmoothingArg::Spline => Smoothing::Spline,
        }
    }
}

fn run(cli: Cli) -> Result<String, WorkbenchError> {
    match cli.command {
        Command::Baseline { config, common } => {
            let seed = common.seed.unwrap_or(0);
            let args = BaselineArgs { config, out: common.out.clone(), seed };
            run_in_dir("baseline", &common.out, seed, |m| cmd_baseline(&args, m))?;
        }
        Command::Train { config, trpo_config, warm_start, max_wall_secs, common } => {
            let args = TrainArgs { config, trpo_config, warm_start, max_wall_secs, out: common.out.clone(), seed: common.seed };
            run_in_dir("train", &common.out, common.seed.unwrap_or(0), |m| cmd_train(&args, m))?;
        }
        Command::Evaluate { checkpoint, config, smoothing, common } => {
            let seed = common.seed.unwrap_or(0);
            let args = EvaluateArgs { checkpoint, config, smoothing: smoothing.into(), out: common.out.clone(), seed };
            run_in_dir("evaluate", &common.out, seed, |m| cmd_evaluate(&args, m))?;
        }
        Command::Analyze { checkpoint, random, dataset, config, n_samples, epsilon, exploration_std, common } => {
            let source = match (checkpoint, random, dataset) {
                (Some(p), _, _) => AnalysisSource::Checkpoint(p),
                (None, true, _) => AnalysisSource::Random,
                (None, false, Some(p)) => AnalysisSource::Dataset(p),
                (None, false, None) => {
                    return Err(WorkbenchError::Usage("analyze needs --checkpoint, --random or --dataset".into()))
                }
            };
            let seed = common.seed.unwrap_or(0);
            let args = AnalyzeArgs { source, config, n_samples, epsilon, exploration_std, out: common.out.clone(), seed };
            let graph = run_in_dir("analyze", &common.out, seed, |m| cmd_analyze(&args, m))?;
            return Ok(format!("relevant: {}\nprunable: {}", graph.relevant.join(" "), graph.prunable().join(" ")));
        }
    }
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; bad arguments count as configuration errors.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
