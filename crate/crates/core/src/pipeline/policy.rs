//! Execution policies: the interchangeable strategies that drive one
//! episode. All of them share the same estimation stack and differ in what
//! they do with the estimates.
//!
//! - `full_pipeline` — greedy one-action-at-a-time planning with collision
//!   checks (the real system).
//! - `teleport_baseline` — applies every estimated transform at once,
//!   ignoring collisions; a physically impossible upper bound.
//! - `oracle_transforms` — feeds ground-truth transforms to the planner,
//!   isolating planning from estimation.

use std::collections::BTreeMap;

use nalgebra::Unit;

use super::config::ExperimentConfig;
use super::{
    ActionKind, ActionRecord, EpisodeResult, EstimateError, ObjectResult, PipelineError,
    TermReason,
};
use crate::flow::{corrupt, ground_truth_flow};
use crate::geometry::RigidTransform;
use crate::planner::{next_estimates, plan_step, EstimatedMove, EstimationRound, PlanAction, PlannerError};
use crate::registration::TransformSolver;
use crate::registry::{build_solver, SolverContext};
use crate::scene::{apply_action, render, teleport_all, Observation, SceneError, ScenePair, SceneState};
use crate::seeds;

/// One selectable episode strategy.
pub trait ExecutionPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(
        &self,
        pair: &ScenePair,
        cfg: &ExperimentConfig,
        scene_id: u64,
    ) -> Result<EpisodeResult, PipelineError>;
}

// Seed-path discriminators for the planner streams.
const PLAN_TAG: u64 = 1;

fn episode_solver(
    pair: &ScenePair,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn TransformSolver>, PipelineError> {
    let normal = Unit::new_normalize(pair.current.table_normal_in_camera());
    Ok(build_solver(
        &cfg.rotation,
        &SolverContext {
            table_normal_in_camera: normal,
        },
    )?)
}

/// Render the current state, derive corrupted flow against the goal render,
/// and estimate per-object transforms.
#[allow(clippy::too_many_arguments)]
fn estimation_round(
    pair: &ScenePair,
    state: &SceneState,
    goal_obs: &Observation,
    prior: Option<&BTreeMap<i32, i32>>,
    solver: &dyn TransformSolver,
    cfg: &ExperimentConfig,
    scene_id: u64,
    round: u64,
) -> Result<EstimationRound, PipelineError> {
    let cur_obs = render(state, &cfg.intrinsics);
    let round_pair = ScenePair {
        current: state.clone(),
        goal: pair.goal.clone(),
        gt_transforms: pair.remaining_transforms(state),
    };
    let exact = ground_truth_flow(&round_pair, &cur_obs, goal_obs)?;
    let corr_seed = seeds::derive(cfg.corruption.seed, &[scene_id, round]);
    let flow = corrupt(&exact, &cfg.corruption.with_seed(corr_seed));
    let ransac = cfg
        .ransac
        .with_seed(seeds::derive(cfg.ransac.seed, &[scene_id, round]));
    Ok(next_estimates(
        &cur_obs,
        goal_obs,
        &flow,
        prior,
        &cfg.matching,
        &ransac,
        solver,
        &state.camera_pose,
    )?)
}

fn move_record(
    step: usize,
    kind: ActionKind,
    object_id: i32,
    transform: &RigidTransform,
    lambda: f64,
    est: Option<&EstimatedMove>,
) -> ActionRecord {
    ActionRecord {
        step,
        kind,
        object_id: Some(object_id),
        transform: transform.into(),
        score: est.map(|m| m.score(lambda)),
        inliers: est.and_then(|m| m.inliers),
        residual: est.and_then(|m| m.rms_residual),
    }
}

fn done_record(step: usize) -> ActionRecord {
    ActionRecord {
        step,
        kind: ActionKind::Done,
        object_id: None,
        transform: (&RigidTransform::identity()).into(),
        score: None,
        inliers: None,
        residual: None,
    }
}

/// Accuracy of this round's estimates against the remaining ground truth.
fn estimate_errors_of(
    pair: &ScenePair,
    state: &SceneState,
    moves: &[EstimatedMove],
    round: u64,
) -> Vec<EstimateError> {
    let remaining = pair.remaining_transforms(state);
    moves
        .iter()
        .filter_map(|m| {
            let gt = remaining.get(&m.object_id)?;
            Some(EstimateError {
                round,
                object_id: m.object_id,
                rot_err_deg: m.transform.rotation_distance_to(gt).to_degrees(),
                trans_err_cm: (m.transform.translation - gt.translation).norm() * 100.0,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    pair: &ScenePair,
    final_state: &SceneState,
    scene_id: u64,
    steps_taken: usize,
    terminated: TermReason,
    actions: Vec<ActionRecord>,
    last_estimated: Option<&[i32]>,
    estimate_errors: Vec<EstimateError>,
) -> EpisodeResult {
    let objects = final_state
        .objects
        .iter()
        .map(|obj| {
            let id = obj.model.id;
            let goal = pair.goal.pose_of(id).expect("object exists in goal state");
            let rel_rot =
                RigidTransform::new(goal.rotation * obj.pose.rotation.transpose(), Default::default());
            // Degraded: the last estimation round produced no usable
            // transform for this object (ambiguous match, too few pixels,
            // no consensus, or fully occluded).
            let degraded = match last_estimated {
                Some(ids) => !ids.contains(&id),
                None => false,
            };
            ObjectResult {
                object_id: id,
                rot_err_deg: rel_rot.rotation_angle().to_degrees(),
                trans_err_cm: (goal.translation - obj.pose.translation).norm() * 100.0,
                degraded,
            }
        })
        .collect();
    EpisodeResult {
        scene_id,
        steps_taken,
        terminated,
        objects,
        actions,
        estimate_errors,
    }
}

/// Greedy one-object-at-a-time planning over estimated transforms.
pub struct FullPipelinePolicy;

impl ExecutionPolicy for FullPipelinePolicy {
    fn name(&self) -> &'static str {
        "full_pipeline"
    }

    fn run(
        &self,
        pair: &ScenePair,
        cfg: &ExperimentConfig,
        scene_id: u64,
    ) -> Result<EpisodeResult, PipelineError> {
        let cap = cfg.action_cap(pair.current.objects.len());
        let solver = episode_solver(pair, cfg)?;
        let goal_obs = render(&pair.goal, &cfg.intrinsics);
        let mut state = pair.current.clone();
        let mut actions = Vec::new();
        let mut estimate_errors = Vec::new();
        let mut steps = 0usize;
        let mut prior: Option<BTreeMap<i32, i32>> = None;
        let mut last_estimated: Vec<i32> = Vec::new();
        let mut round = 0u64;

        let terminated = loop {
            if steps >= cap {
                break TermReason::Cap;
            }
            let est = estimation_round(
                pair,
                &state,
                &goal_obs,
                prior.as_ref(),
                solver.as_ref(),
                cfg,
                scene_id,
                round,
            )?;
            estimate_errors.extend(estimate_errors_of(pair, &state, &est.moves, round));
            last_estimated = est.moves.iter().map(|m| m.object_id).collect();
            prior = Some(est.mapping.clone());
            let plan_seed = seeds::derive(cfg.seed, &[scene_id, round, PLAN_TAG]);
            round += 1;
            match plan_step(&state, &est.moves, &cfg.planner, plan_seed) {
                Ok(PlanAction::Done) => {
                    actions.push(done_record(steps));
                    break TermReason::Done;
                }
                Ok(PlanAction::GoalMove {
                    object_id,
                    transform,
                }) => {
                    let est_move = est.moves.iter().find(|m| m.object_id == object_id);
                    match apply_action(&state, object_id, &transform) {
                        Ok(next) => {
                            state = next;
                            actions.push(move_record(
                                steps,
                                ActionKind::GoalMove,
                                object_id,
                                &transform,
                                cfg.planner.lambda,
                                est_move,
                            ));
                        }
                        Err(SceneError::NonPlanarPose { .. }) => {
                            // The estimate tilted past the snap tolerance;
                            // the attempt costs a step and the object stays.
                            actions.push(move_record(
                                steps,
                                ActionKind::FailedMove,
                                object_id,
                                &transform,
                                cfg.planner.lambda,
                                est_move,
                            ));
                        }
                        Err(e) => return Err(e.into()),
                    }
                    steps += 1;
                }
                Ok(PlanAction::FreespaceMove {
                    object_id,
                    transform,
                }) => {
                    state = apply_action(&state, object_id, &transform)?;
                    actions.push(move_record(
                        steps,
                        ActionKind::FreespaceMove,
                        object_id,
                        &transform,
                        cfg.planner.lambda,
                        None,
                    ));
                    steps += 1;
                }
                Err(PlannerError::PlanningStuck) => break TermReason::Stuck,
                Err(e) => return Err(e.into()),
            }
        };
        Ok(finalize(
            pair,
            &state,
            scene_id,
            steps,
            terminated,
            actions,
            Some(&last_estimated),
            estimate_errors,
        ))
    }
}

/// Applies every estimated transform simultaneously, no collision checking,
/// for a bounded number of refinement rounds.
pub struct TeleportPolicy;

impl ExecutionPolicy for TeleportPolicy {
    fn name(&self) -> &'static str {
        "teleport_baseline"
    }

    fn run(
        &self,
        pair: &ScenePair,
        cfg: &ExperimentConfig,
        scene_id: u64,
    ) -> Result<EpisodeResult, PipelineError> {
        let solver = episode_solver(pair, cfg)?;
        let goal_obs = render(&pair.goal, &cfg.intrinsics);
        let mut state = pair.current.clone();
        let mut actions = Vec::new();
        let mut estimate_errors = Vec::new();
        let mut steps = 0usize;
        let mut prior: Option<BTreeMap<i32, i32>> = None;
        let mut last_estimated: Vec<i32> = Vec::new();
        let mut terminated = TermReason::Cap;

        for round in 0..cfg.teleport_rounds {
            let est = estimation_round(
                pair,
                &state,
                &goal_obs,
                prior.as_ref(),
                solver.as_ref(),
                cfg,
                scene_id,
                round as u64,
            )?;
            estimate_errors.extend(estimate_errors_of(pair, &state, &est.moves, round as u64));
            last_estimated = est.moves.iter().map(|m| m.object_id).collect();
            prior = Some(est.mapping.clone());
            if est.moves.iter().all(|m| m.below_thresholds(&cfg.planner)) {
                actions.push(done_record(steps));
                terminated = TermReason::Done;
                break;
            }
            let transforms: BTreeMap<i32, RigidTransform> = est
                .moves
                .iter()
                .map(|m| (m.object_id, m.transform))
                .collect();
            for m in &est.moves {
                actions.push(move_record(
                    steps,
                    ActionKind::Teleport,
                    m.object_id,
                    &m.transform,
                    cfg.planner.lambda,
                    Some(m),
                ));
            }
            state = teleport_all(&state, &transforms);
            steps += 1;
        }
        Ok(finalize(
            pair,
            &state,
            scene_id,
            steps,
            terminated,
            actions,
            Some(&last_estimated),
            estimate_errors,
        ))
    }
}

/// Feeds the simulator's exact remaining transforms to the planner: no
/// rendering, no estimation error. Used to validate planner convergence.
pub struct OraclePolicy;

impl ExecutionPolicy for OraclePolicy {
    fn name(&self) -> &'static str {
        "oracle_transforms"
    }

    fn run(
        &self,
        pair: &ScenePair,
        cfg: &ExperimentConfig,
        scene_id: u64,
    ) -> Result<EpisodeResult, PipelineError> {
        let cap = cfg.action_cap(pair.current.objects.len());
        let mut state = pair.current.clone();
        let mut actions = Vec::new();
        let mut steps = 0usize;
        let mut round = 0u64;

        let terminated = loop {
            if steps >= cap {
                break TermReason::Cap;
            }
            let moves: Vec<EstimatedMove> = pair
                .remaining_transforms(&state)
                .into_iter()
                .map(|(id, t)| EstimatedMove::exact(id, t))
                .collect();
            let plan_seed = seeds::derive(cfg.seed, &[scene_id, round, PLAN_TAG]);
            round += 1;
            match plan_step(&state, &moves, &cfg.planner, plan_seed) {
                Ok(PlanAction::Done) => {
                    actions.push(done_record(steps));
                    break TermReason::Done;
                }
                Ok(PlanAction::GoalMove {
                    object_id,
                    transform,
                })
                | Ok(PlanAction::FreespaceMove {
                    object_id,
                    transform,
                }) => {
                    let kind = if moves
                        .iter()
                        .any(|m| m.object_id == object_id && m.transform == transform)
                    {
                        ActionKind::GoalMove
                    } else {
                        ActionKind::FreespaceMove
                    };
                    state = apply_action(&state, object_id, &transform)?;
                    let est = moves.iter().find(|m| m.object_id == object_id);
                    actions.push(move_record(
                        steps,
                        kind,
                        object_id,
                        &transform,
                        cfg.planner.lambda,
                        est,
                    ));
                    steps += 1;
                }
                Err(PlannerError::PlanningStuck) => break TermReason::Stuck,
                Err(e) => return Err(e.into()),
            }
        };
        Ok(finalize(
            pair,
            &state,
            scene_id,
            steps,
            terminated,
            actions,
            None,
            Vec::new(),
        ))
    }
}
