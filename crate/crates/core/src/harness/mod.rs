//! Rollouts on the kinematic stepper, trajectory logs, success criteria,
//! domain randomization and metric aggregation.

pub mod env;
pub mod eval;
pub mod log;
pub mod policy;
pub mod randomize;
pub mod rollout;

pub use env::{KinematicEnv, StepOutcome, StepperConfig};
pub use eval::{
    aggregate, evaluate_logs, evaluate_success, group_outcomes, log_files, run_eval, survived, CriteriaMode,
    EpisodeOutcome, EvalPlan, GroupKey, GroupMetrics, MetricsTable, SuccessCriteria, Verdict, TSV_HEADER,
};
pub use log::{EpisodeStatus, LogMeta, StepRecord, TrajectoryLog};
pub use policy::{Action, Policy, PolicySpec, ScriptedTrot, Stand};
pub use randomize::{domain_randomize, RandomizationRanges, RandomizedParams};
pub use rollout::{run_episode, run_rollout, Episode, RolloutConfig};

/// Reads and validates a trajectory log file.
pub fn ingest_log(path: impl AsRef<std::path::Path>) -> crate::Result<TrajectoryLog> {
    TrajectoryLog::ingest(path)
}
