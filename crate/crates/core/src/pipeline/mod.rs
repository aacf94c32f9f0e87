//! The observe–estimate–plan–act loop, batch experiments, and metrics.

pub mod config;
pub mod experiment;
pub mod policy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowError;
use crate::planner::PlannerError;
use crate::registry::UnknownStrategy;
use crate::scene::json::TransformJson;
use crate::scene::{SceneError, ScenePair};

pub use config::ExperimentConfig;
pub use experiment::{
    compute_metrics, read_results_csv, run_experiment, write_action_log, write_results_csv,
    write_summary_json, ExperimentOutput, MetricsError, MetricsSummary,
};
pub use policy::ExecutionPolicy;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermReason {
    /// Every estimated transform fell below the termination thresholds.
    Done,
    /// No feasible action existed.
    Stuck,
    /// The action cap was reached first.
    Cap,
}

impl std::fmt::Display for TermReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TermReason::Done => "done",
            TermReason::Stuck => "stuck",
            TermReason::Cap => "cap",
        })
    }
}

impl std::str::FromStr for TermReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "done" => Ok(TermReason::Done),
            "stuck" => Ok(TermReason::Stuck),
            "cap" => Ok(TermReason::Cap),
            other => Err(format!("unknown termination reason '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GoalMove,
    FreespaceMove,
    Teleport,
    Done,
    /// A planned move whose composed pose tilted beyond the snap tolerance;
    /// the scene rejected it and the state is unchanged.
    FailedMove,
}

/// One line of the per-episode action log.
#[derive(Debug, Clone, Serialize)]
pub struct ActionRecord {
    pub step: usize,
    pub kind: ActionKind,
    pub object_id: Option<i32>,
    pub transform: TransformJson,
    pub score: Option<f64>,
    pub inliers: Option<usize>,
    pub residual: Option<f64>,
}

/// Final pose error of one object, against its goal pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectResult {
    pub object_id: i32,
    /// Geodesic angle between final and goal rotation, degrees.
    pub rot_err_deg: f64,
    /// Distance between final and goal position, centimeters.
    pub trans_err_cm: f64,
    /// Estimation was degraded for this object in the last round.
    pub degraded: bool,
}

/// Accuracy of one transform estimate against the simulator's remaining
/// ground-truth transform at that round, for estimation-level evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateError {
    pub round: u64,
    pub object_id: i32,
    pub rot_err_deg: f64,
    pub trans_err_cm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub scene_id: u64,
    pub steps_taken: usize,
    pub terminated: TermReason,
    pub objects: Vec<ObjectResult>,
    pub actions: Vec<ActionRecord>,
    /// Per-round estimation accuracy (empty in oracle mode).
    pub estimate_errors: Vec<EstimateError>,
}

/// Run one episode under the policy named in `cfg.mode`.
pub fn run_episode(
    pair: &ScenePair,
    cfg: &ExperimentConfig,
    scene_id: u64,
) -> Result<EpisodeResult, PipelineError> {
    crate::registry::build_policy(&cfg.mode)?.run(pair, cfg, scene_id)
}
