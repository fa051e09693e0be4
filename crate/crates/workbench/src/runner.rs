//! Multi-threaded rollout collection.

use std::num::NonZeroUsize;

use ctap_core::agent::{collect_episode, Episode, EpisodeRunner, GaussianPolicy, ValueBaseline};
use ctap_core::env::{CtapEnv, ScenarioConfig};

pub const THREADS_VAR: &str = "CTAP_THREADS";

/// Worker count: `CTAP_THREADS` when set to a positive integer, otherwise
/// the available parallelism.
pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, NonZeroUsize::get);
    match std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => available,
    }
}

/// Splits the episode seeds into contiguous chunks, one per worker, and
/// concatenates the results in seed order. Each episode depends only on
/// its seed, so the batch is identical for any worker count.
#[derive(Clone, Copy, Debug)]
pub struct ThreadedRunner {
    pub threads: usize,
}

impl ThreadedRunner {
    pub fn from_env() -> Self {
        Self { threads: worker_count() }
    }
}

impl EpisodeRunner for ThreadedRunner {
    fn run(&self, config: &ScenarioConfig, policy: &GaussianPolicy, value: &ValueBaseline, seeds: &[u64]) -> ctap_core::Result<Vec<Episode>> {
        let workers = self.threads.clamp(1, seeds.len().max(1));
        if workers == 1 {
            let mut env = CtapEnv::new(config.clone())?;
            return seeds.iter().map(|&s| collect_episode(&mut env, policy, value, s)).collect();
        }
        let chunk = seeds.len().div_ceil(workers);
        let results: Vec<ctap_core::Result<Vec<Episode>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        let mut env = CtapEnv::new(config.clone())?;
                        part.iter().map(|&s| collect_episode(&mut env, policy, value, s)).collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(seeds.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctap_core::agent::{Mlp, SerialRunner};
    use ctap_core::env::ObservationMode;
    use ctap_core::linalg::Rng;

    #[test]
    fn batch_does_not_depend_on_worker_count() {
        let cfg = ScenarioConfig { observation_mode: ObservationMode::Reduced, ..ScenarioConfig::default() };
        let mut rng = Rng::seed_from_u64(1);
        let policy = GaussianPolicy::random(4, &[8], 2, -1.0, &mut rng).unwrap();
        let value = ValueBaseline::new(Mlp::random(&[4, 8, 1], 1.0, &mut rng).unwrap()).unwrap();
        let seeds: Vec<u64> = (0..7).map(|i| 100 + i).collect();
        let serial = SerialRunner.run(&cfg, &policy, &value, &seeds).unwrap();
        for threads in [1, 2, 3, 8] {
            assert_eq!(ThreadedRunner { threads }.run(&cfg, &policy, &value, &seeds).unwrap(), serial);
        }
    }
}
