//! Greedy collision-aware action selection.
//!
//! Each round the planner receives one estimated world-frame transform per
//! object. If every remaining transform is below the termination thresholds
//! the episode is done. Otherwise objects are ranked by the score
//! `S = |r| + λ·|t|` (rotation in radians, translation in centimeters) and
//! the highest-scored object whose goal placement is collision-free is
//! moved. When no goal placement is feasible, the planner falls back to
//! relocating an object to sampled free space so that a later round can
//! complete the blocked moves.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::{correspondences, match_objects, FlowError, FlowField, MatchConfig, MatchOutcome};
use crate::geometry::RigidTransform;
use crate::registration::{camera_to_world, ransac_fit, RansacConfig, RegistrationError, TransformSolver};
use crate::scene::{Observation, SceneState, PLANAR_SNAP_TOL};
use crate::seeds;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("no object with id {0} in scene")]
    InvalidObjectId(i32),
    #[error("no feasible goal move and no free space found for any object")]
    PlanningStuck,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Weight of translation (cm) against rotation (rad) in the score.
    pub lambda: f64,
    /// Termination threshold on remaining rotation, radians.
    pub rot_threshold: f64,
    /// Termination threshold on remaining translation, meters.
    pub trans_threshold: f64,
    /// Candidate poses sampled per object in the freespace fallback.
    pub freespace_samples: usize,
    /// Minimum footprint separation for a placement to count as free.
    pub clearance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            rot_threshold: 10f64.to_radians(),
            trans_threshold: 0.05,
            freespace_samples: 100,
            clearance: 0.005,
        }
    }
}

/// One object's estimated relative transform, with fit diagnostics when it
/// came from a robust estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedMove {
    pub object_id: i32,
    /// World-frame transform mapping the object's current pose toward goal.
    pub transform: RigidTransform,
    pub inliers: Option<usize>,
    pub rms_residual: Option<f64>,
}

impl EstimatedMove {
    pub fn exact(object_id: i32, transform: RigidTransform) -> Self {
        Self {
            object_id,
            transform,
            inliers: None,
            rms_residual: None,
        }
    }

    pub fn rotation_magnitude(&self) -> f64 {
        self.transform.rotation_angle()
    }

    /// Norm of the transform's translation component, meters.
    pub fn translation_magnitude(&self) -> f64 {
        self.transform.translation.norm()
    }

    /// `S = |r| + λ·|t|`, rotation in radians, translation in centimeters.
    pub fn score(&self, lambda: f64) -> f64 {
        self.rotation_magnitude() + lambda * (100.0 * self.translation_magnitude())
    }

    pub fn below_thresholds(&self, cfg: &PlannerConfig) -> bool {
        self.rotation_magnitude() < cfg.rot_threshold
            && self.translation_magnitude() < cfg.trans_threshold
    }
}

/// Planner output for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanAction {
    /// Every estimated transform is below the termination thresholds.
    Done,
    /// Move the object by its estimated transform.
    GoalMove {
        object_id: i32,
        transform: RigidTransform,
    },
    /// Relocate the object to a sampled collision-free planar pose.
    FreespaceMove {
        object_id: i32,
        transform: RigidTransform,
    },
}

impl PlanAction {
    pub fn object_id(&self) -> Option<i32> {
        match self {
            PlanAction::Done => None,
            PlanAction::GoalMove { object_id, .. }
            | PlanAction::FreespaceMove { object_id, .. } => Some(*object_id),
        }
    }
}

/// True iff placing `object_id` at `target_pose` would bring its footprint
/// within `clearance` of any other object's footprint or off the table. The
/// object's own current footprint does not count.
pub fn check_collision(
    state: &SceneState,
    object_id: i32,
    target_pose: &RigidTransform,
    clearance: f64,
) -> Result<bool, PlannerError> {
    let idx = state
        .object_index(object_id)
        .ok_or(PlannerError::InvalidObjectId(object_id))?;
    let fp = state.objects[idx].model.footprint.transformed(target_pose);
    if !fp.within_rect(&state.table_bounds) {
        return Ok(true);
    }
    for (j, other) in state.objects.iter().enumerate() {
        if j == idx {
            continue;
        }
        if fp.distance_to(&other.world_footprint()) < clearance {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Pick the next action. Objects already below both thresholds are not
/// actionable; if none is actionable the episode is done. Otherwise the
/// highest score wins (ties to the smaller object id), goal moves first,
/// then freespace relocation in the same order, and finally freespace
/// relocation of unestimated objects that block someone's goal slot.
pub fn plan_step(
    state: &SceneState,
    moves: &[EstimatedMove],
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<PlanAction, PlannerError> {
    for m in moves {
        if state.object_index(m.object_id).is_none() {
            return Err(PlannerError::InvalidObjectId(m.object_id));
        }
    }

    let mut actionable: Vec<&EstimatedMove> =
        moves.iter().filter(|m| !m.below_thresholds(cfg)).collect();
    if actionable.is_empty() {
        return Ok(PlanAction::Done);
    }
    actionable.sort_by(|a, b| {
        b.score(cfg.lambda)
            .partial_cmp(&a.score(cfg.lambda))
            .unwrap()
            .then(a.object_id.cmp(&b.object_id))
    });

    // Goal placements of all estimated objects; used to keep freespace
    // samples out of slots someone still has to reach.
    let goal_placements: Vec<(i32, RigidTransform)> = moves
        .iter()
        .filter_map(|m| {
            let pose = m.transform.compose(state.pose_of(m.object_id)?);
            (pose.tilt_angle() < PLANAR_SNAP_TOL).then_some((m.object_id, pose))
        })
        .collect();

    // Stage 1: highest-scored object whose goal placement is collision-free.
    // A placement whose tilt exceeds the snap tolerance is still returned;
    // applying it fails and the episode records the failed attempt.
    for m in &actionable {
        let pose = m.transform.compose(state.pose_of(m.object_id).unwrap());
        if !check_collision(state, m.object_id, &pose, cfg.clearance)? {
            return Ok(PlanAction::GoalMove {
                object_id: m.object_id,
                transform: m.transform,
            });
        }
    }

    // Stage 2: relocate an actionable object to free space.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in &actionable {
        if let Some(pose) =
            sample_freespace(state, m.object_id, &goal_placements, cfg, &mut rng)
        {
            let current = state.pose_of(m.object_id).unwrap();
            return Ok(PlanAction::FreespaceMove {
                object_id: m.object_id,
                transform: pose.compose(&current.invert()),
            });
        }
    }

    // Stage 3: an object without an estimate may be squatting on someone's
    // goal slot; move it out of the way. Objects that block nobody stay put.
    let estimated: Vec<i32> = moves.iter().map(|m| m.object_id).collect();
    for obj in &state.objects {
        let id = obj.model.id;
        if estimated.contains(&id) {
            continue;
        }
        let fp = obj.world_footprint();
        let blocks = goal_placements.iter().any(|(goal_id, pose)| {
            *goal_id != id && {
                let goal_fp = state.objects[state.object_index(*goal_id).unwrap()]
                    .model
                    .footprint
                    .transformed(pose);
                fp.distance_to(&goal_fp) < cfg.clearance
            }
        });
        if !blocks {
            continue;
        }
        if let Some(pose) = sample_freespace(state, id, &goal_placements, cfg, &mut rng) {
            return Ok(PlanAction::FreespaceMove {
                object_id: id,
                transform: pose.compose(&obj.pose.invert()),
            });
        }
    }

    Err(PlannerError::PlanningStuck)
}

/// Rejection-sample a planar pose that is on the table, clear of every other
/// object's current footprint, and clear of every other object's estimated
/// goal placement.
fn sample_freespace(
    state: &SceneState,
    object_id: i32,
    goal_placements: &[(i32, RigidTransform)],
    cfg: &PlannerConfig,
    rng: &mut ChaCha8Rng,
) -> Option<RigidTransform> {
    let idx = state.object_index(object_id)?;
    let model = &state.objects[idx].model;
    let b = &state.table_bounds;
    for _ in 0..cfg.freespace_samples {
        let pose = RigidTransform::planar(
            rng.random_range(b.min_x..=b.max_x),
            rng.random_range(b.min_y..=b.max_y),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let fp = model.footprint.transformed(&pose);
        if !fp.within_rect(b) {
            continue;
        }
        let hits_current = state.objects.iter().enumerate().any(|(j, other)| {
            j != idx && fp.distance_to(&other.world_footprint()) < cfg.clearance
        });
        if hits_current {
            continue;
        }
        let hits_goal = goal_placements.iter().any(|(goal_id, goal_pose)| {
            *goal_id != object_id && {
                let goal_idx = match state.object_index(*goal_id) {
                    Some(i) => i,
                    None => return false,
                };
                let goal_fp = state.objects[goal_idx].model.footprint.transformed(goal_pose);
                fp.distance_to(&goal_fp) < cfg.clearance
            }
        });
        if !hits_goal {
            return Some(pose);
        }
    }
    None
}

/// Why an object could not be estimated this round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradedReason {
    AmbiguousMatch,
    ConflictLost,
    NoValidPixels,
    TooFewCorrespondences,
    NoConsensus,
    DegenerateGeometry,
}

/// Estimation output for one round: per-object moves, objects that could
/// not be estimated, and the identity mapping to carry into later rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRound {
    pub moves: Vec<EstimatedMove>,
    pub degraded: Vec<(i32, DegradedReason)>,
    pub mapping: BTreeMap<i32, i32>,
}

/// Full perception stack for one round: match object identities through the
/// flow, build per-object correspondences, and fit world-frame transforms
/// with RANSAC. Estimation failures degrade single objects, never the round.
/// A prior mapping (from an earlier round) backs up ambiguous matches.
#[allow(clippy::too_many_arguments)]
pub fn next_estimates(
    cur_obs: &Observation,
    goal_obs: &Observation,
    flow: &FlowField,
    prior_mapping: Option<&BTreeMap<i32, i32>>,
    match_cfg: &MatchConfig,
    ransac_cfg: &RansacConfig,
    solver: &dyn TransformSolver,
    camera_pose: &RigidTransform,
) -> Result<EstimationRound, FlowError> {
    let matching = match_objects(cur_obs, goal_obs, flow, match_cfg)?;
    let mut moves = Vec::new();
    let mut degraded = Vec::new();
    let mut mapping = BTreeMap::new();

    for (&object_id, outcome) in &matching.outcomes {
        let goal_id = match outcome {
            MatchOutcome::Matched { goal_id, .. } => Some(*goal_id),
            MatchOutcome::Ambiguous { .. } | MatchOutcome::ConflictLost { .. } => {
                prior_mapping.and_then(|m| m.get(&object_id).copied())
            }
            MatchOutcome::NoPixels => None,
        };
        let Some(goal_id) = goal_id else {
            degraded.push((
                object_id,
                match outcome {
                    MatchOutcome::Ambiguous { .. } => DegradedReason::AmbiguousMatch,
                    MatchOutcome::ConflictLost { .. } => DegradedReason::ConflictLost,
                    _ => DegradedReason::NoValidPixels,
                },
            ));
            continue;
        };
        mapping.insert(object_id, goal_id);

        let corr = match correspondences(cur_obs, goal_obs, flow, object_id, &mapping, match_cfg)
        {
            Ok(c) => c,
            Err(FlowError::TooFewCorrespondences { .. }) => {
                degraded.push((object_id, DegradedReason::TooFewCorrespondences));
                continue;
            }
            Err(e) => return Err(e),
        };
        let cfg = ransac_cfg.with_seed(seeds::derive(ransac_cfg.seed, &[object_id as u64]));
        match ransac_fit(&corr, &cfg, solver) {
            Ok(fit) => moves.push(EstimatedMove {
                object_id,
                transform: camera_to_world(&fit.transform, camera_pose),
                inliers: Some(fit.inlier_count()),
                rms_residual: Some(fit.rms_residual),
            }),
            Err(RegistrationError::NoConsensus { .. }) => {
                degraded.push((object_id, DegradedReason::NoConsensus));
            }
            Err(RegistrationError::TooFewCorrespondences { .. }) => {
                degraded.push((object_id, DegradedReason::TooFewCorrespondences));
            }
            Err(RegistrationError::DegenerateGeometry(_)) => {
                degraded.push((object_id, DegradedReason::DegenerateGeometry));
            }
        }
    }
    Ok(EstimationRound {
        moves,
        degraded,
        mapping,
    })
}
