//! Experiment configuration: one document that pins every knob of a run.
//!
//! All random streams derive from the seeds recorded here, so a config file
//! fully determines the outputs.

use serde::{Deserialize, Serialize};

use crate::flow::{CorruptionModel, MatchConfig};
use crate::geometry::CameraIntrinsics;
use crate::planner::PlannerConfig;
use crate::registration::RansacConfig;
use crate::scene::GenerationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Number of scene pairs to generate and run.
    pub scenes: usize,
    /// Master seed; per-scene and per-round streams derive from it.
    pub seed: u64,
    /// Execution policy, by registry name: `full_pipeline`,
    /// `teleport_baseline`, or `oracle_transforms`.
    pub mode: String,
    /// Rotation model, by registry name: `planar` or `full_se3`.
    pub rotation: String,
    pub intrinsics: CameraIntrinsics,
    pub generation: GenerationConfig,
    /// Flow corruption; its `seed` field is the base of the corruption
    /// streams (round streams derive from it).
    pub corruption: CorruptionModel,
    /// Robust fit parameters; the `seed` field is the base of the per-round,
    /// per-object RANSAC streams.
    pub ransac: RansacConfig,
    pub planner: PlannerConfig,
    pub matching: MatchConfig,
    /// Maximum refinement rounds for the teleport baseline.
    pub teleport_rounds: usize,
}

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480)
        .expect("default intrinsics are valid")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenes: 100,
            seed: 0,
            mode: "full_pipeline".to_string(),
            rotation: "planar".to_string(),
            intrinsics: default_intrinsics(),
            generation: GenerationConfig::default(),
            corruption: CorruptionModel::default(),
            ransac: RansacConfig::default(),
            planner: PlannerConfig::default(),
            matching: MatchConfig::default(),
            teleport_rounds: 3,
        }
    }
}

impl ExperimentConfig {
    /// Action cap for an episode with `n` objects: the 2n−1 worst case plus
    /// slack for re-estimation churn.
    pub fn action_cap(&self, n_objects: usize) -> usize {
        3 * n_objects + 5
    }
}
