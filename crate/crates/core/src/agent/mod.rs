//! Policy-gradient agent: Gaussian MLP policy trained with TRPO.

mod mlp;
mod policy;
mod rollout;
mod train;
mod trpo;

pub use mlp::{ForwardCache, Mlp};
pub use policy::{gaussian_kl, gaussian_log_prob, GaussianPolicy, PolicyEval};
pub use rollout::{compute_gae, episode_advantages, normalize, Episode, RolloutBatch};
pub use train::{
    collect_episode, evaluate, greedy_schedule, obs_layout, simulate, train, Control, Controller, EpisodeRunner,
    EpochRecord, EvalMetrics, Evaluation, PolicyCheckpoint, ScheduleController, SerialRunner, Smoothing, TrainOutcome,
    TrainSetup,
};
pub use trpo::{
    mean_kl, mean_kl_grad, policy_step, surrogate, surrogate_grad, trpo_update, value_loss_grad, FisherOperator,
    PolicySamples, TrpoConfig, UpdateStats, ValueBaseline,
};
