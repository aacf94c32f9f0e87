//! Flow oracle: dense pixel correspondences between current and goal
//! observations, derived from simulator ground truth and corrupted with a
//! controlled noise model in place of a learned flow network.
//!
//! Flow maps current-image pixels to goal-image pixels: a pixel `(u, v)`
//! with displacement `(du, dv)` corresponds to goal pixel `(u+du, v+dv)`.
//! Background pixels carry zero flow (the camera does not move between the
//! two captures); pixels whose transported point is occluded in the goal
//! view are marked invalid.

pub mod corrupt;
pub mod io;
pub mod matching;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::RigidTransform;
use crate::grid::Grid;
use crate::scene::{Observation, ScenePair};

pub use corrupt::{corrupt, CorruptionModel};
pub use matching::{correspondences, match_objects, CorrespondenceSet, MatchConfig, MatchOutcome, ObjectMatching};

/// Depth disagreement at the landing pixel beyond which a transported point
/// is considered occluded in the goal view.
pub const OCCLUSION_TOL: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("current and goal observations use different intrinsics or camera pose")]
    IntrinsicsMismatch,
    #[error("object {object_id} has only {found} usable correspondences (minimum {min})")]
    TooFewCorrespondences {
        object_id: i32,
        found: usize,
        min: usize,
    },
    #[error("object {object_id} has no goal match")]
    UnmatchedObject { object_id: i32 },
}

/// Per-pixel 2D displacement field with a validity mask. Invalid pixels
/// carry zero displacement; valid pixels always land inside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub du: Grid<f64>,
    pub dv: Grid<f64>,
    pub valid: Grid<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            du: Grid::filled(width, height, 0.0),
            dv: Grid::filled(width, height, 0.0),
            valid: Grid::filled(width, height, true),
        }
    }

    pub fn width(&self) -> usize {
        self.du.width()
    }

    pub fn height(&self) -> usize {
        self.du.height()
    }

    /// Nearest landing pixel for a valid source pixel; `None` when the pixel
    /// is invalid.
    pub fn landing(&self, u: usize, v: usize) -> Option<(usize, usize)> {
        if !self.valid.get(u, v) {
            return None;
        }
        let lu = (u as f64 + self.du.get(u, v)).round() as i64;
        let lv = (v as f64 + self.dv.get(u, v)).round() as i64;
        debug_assert!(
            self.du.in_bounds(lu, lv),
            "valid pixel ({u},{v}) lands out of bounds at ({lu},{lv})"
        );
        Some((lu as usize, lv as usize))
    }
}

/// Exact flow between the pair's two renders: unproject each current object
/// pixel, move it by the object's ground-truth transform, and reproject into
/// the goal image. Marked invalid where the transported point is occluded or
/// leaves the frame.
pub fn ground_truth_flow(
    pair: &ScenePair,
    cur_obs: &Observation,
    goal_obs: &Observation,
) -> Result<FlowField, FlowError> {
    if cur_obs.intr != goal_obs.intr
        || pair.current.camera_pose != pair.goal.camera_pose
    {
        return Err(FlowError::IntrinsicsMismatch);
    }
    let intr = &cur_obs.intr;
    let cam = &pair.current.camera_pose;
    let cam_inv = cam.invert();

    // Camera-frame transform per object id: C ∘ gt ∘ C⁻¹.
    let cam_transforms: BTreeMap<i32, RigidTransform> = pair
        .gt_transforms
        .iter()
        .map(|(&id, gt)| (id, cam.compose(gt).compose(&cam_inv)))
        .collect();

    let (w, h) = (intr.width, intr.height);
    let mut flow = FlowField::zeros(w, h);
    for (u, v, seg) in cur_obs.segments.iter() {
        let d = cur_obs.depth.get(u, v);
        if seg < 0 {
            // Static background: zero flow, valid only where depth exists.
            if d <= 0.0 {
                flow.valid.set(u, v, false);
            }
            continue;
        }
        let Some(x_cam) = cam_transforms.get(&seg) else {
            flow.valid.set(u, v, false);
            continue;
        };
        let moved = x_cam.apply_point(&intr.unproject(u as f64, v as f64, d));
        let mut ok = false;
        if let Some((gu, gv)) = intr.project(&moved) {
            let (lu, lv) = (gu.round() as i64, gv.round() as i64);
            if goal_obs.depth.in_bounds(lu, lv) {
                let goal_d = goal_obs.depth.get(lu as usize, lv as usize);
                if (goal_d - moved.z).abs() <= OCCLUSION_TOL {
                    flow.du.set(u, v, gu - u as f64);
                    flow.dv.set(u, v, gv - v as f64);
                    ok = true;
                }
            }
        }
        if !ok {
            flow.valid.set(u, v, false);
        }
    }
    Ok(flow)
}
