//! Tabletop scene simulator: randomized paired scenes under planar object
//! transforms, depth + segment rendering by point splatting, and action
//! application with planar snapping.
//!
//! World frame: z up, table surface at z = 0. Object poses are planar —
//! a yaw about z plus an xy translation — and objects rest on the table.

pub mod generate;
pub mod json;
pub mod polygon;
pub mod render;
pub mod shape;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::grid::Grid;

pub use generate::{generate_scene_pair, GenerationConfig};
pub use polygon::{ConvexPolygon, Rect};
pub use render::render;
pub use shape::{ObjectModel, Shape};

/// Poses that tilt less than this (radians) are snapped to planar; larger
/// tilts are rejected as invalid planner output.
pub const PLANAR_SNAP_TOL: f64 = 2.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("failed to place object {object_id} after {attempts} attempts; table too crowded")]
    PlacementFailure { object_id: i32, attempts: usize },
    #[error("no object with id {0} in scene")]
    InvalidObjectId(i32),
    #[error("pose for object {object_id} tilts {tilt_deg:.2}° out of plane, beyond snap tolerance")]
    NonPlanarPose { object_id: i32, tilt_deg: f64 },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

/// An object with its current world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub model: Arc<ObjectModel>,
    pub pose: RigidTransform,
}

impl PlacedObject {
    /// Footprint moved to the object's world pose.
    pub fn world_footprint(&self) -> ConvexPolygon {
        self.model.footprint.transformed(&self.pose)
    }
}

/// Immutable snapshot of the tabletop: objects, table extent, and the
/// world→camera transform used to observe it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub objects: Vec<PlacedObject>,
    pub table_bounds: Rect,
    pub camera_pose: RigidTransform,
    pub samples_per_m2: f64,
}

impl SceneState {
    pub fn object_index(&self, id: i32) -> Option<usize> {
        self.objects.iter().position(|o| o.model.id == id)
    }

    pub fn pose_of(&self, id: i32) -> Option<&RigidTransform> {
        self.object_index(id).map(|i| &self.objects[i].pose)
    }

    /// Table normal expressed in the camera frame.
    pub fn table_normal_in_camera(&self) -> Vector3<f64> {
        self.camera_pose.rotation * Vector3::z()
    }
}

/// Rendered view of one scene state: depth in meters (0 = no hit) and the
/// id of the object owning each pixel (−1 = table/background).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub depth: Grid<f64>,
    pub segments: Grid<i32>,
    pub intr: CameraIntrinsics,
}

impl Observation {
    /// Segment ids present in the view, ascending.
    pub fn visible_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self
            .segments
            .as_slice()
            .iter()
            .copied()
            .filter(|&id| id >= 0)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Remap segment ids (used to emulate label-agnostic segmentation).
    /// Ids absent from the map are kept.
    pub fn relabeled(&self, map: &BTreeMap<i32, i32>) -> Self {
        let mut segments = self.segments.clone();
        for s in segments.as_mut_slice() {
            if let Some(&new) = map.get(s) {
                *s = new;
            }
        }
        Self {
            depth: self.depth.clone(),
            segments,
            intr: self.intr,
        }
    }
}

/// A rearrangement task: current state, goal state, and the per-object
/// world-frame transform mapping current pose to goal pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub current: SceneState,
    pub goal: SceneState,
    pub gt_transforms: BTreeMap<i32, RigidTransform>,
}

impl ScenePair {
    /// Ground-truth transform from `state`'s pose of each object to its goal
    /// pose. For the initial state this equals `gt_transforms`.
    pub fn remaining_transforms(&self, state: &SceneState) -> BTreeMap<i32, RigidTransform> {
        state
            .objects
            .iter()
            .filter_map(|obj| {
                let goal = self.goal.pose_of(obj.model.id)?;
                Some((obj.model.id, goal.compose(&obj.pose.invert())))
            })
            .collect()
    }
}

fn is_exactly_planar(pose: &RigidTransform, tol: f64) -> bool {
    let r = &pose.rotation;
    r.m13.abs() <= tol
        && r.m23.abs() <= tol
        && r.m31.abs() <= tol
        && r.m32.abs() <= tol
        && (r.m33 - 1.0).abs() <= tol
        && pose.translation.z.abs() <= tol
}

/// Project a nearly-planar pose onto the exactly planar manifold: closest
/// yaw about z, translation dropped onto the table plane.
pub fn snap_planar(pose: &RigidTransform) -> RigidTransform {
    if is_exactly_planar(pose, 1e-12) {
        return *pose;
    }
    RigidTransform::planar(
        pose.translation.x,
        pose.translation.y,
        pose.yaw_projection(),
    )
}

/// Move one object by a relative world-frame transform. The resulting pose
/// is snapped to planar when its tilt is below [`PLANAR_SNAP_TOL`];
/// otherwise the action is rejected.
pub fn apply_action(
    state: &SceneState,
    object_id: i32,
    transform: &RigidTransform,
) -> Result<SceneState, SceneError> {
    let idx = state
        .object_index(object_id)
        .ok_or(SceneError::InvalidObjectId(object_id))?;
    let raw = transform.compose(&state.objects[idx].pose);
    let tilt = raw.tilt_angle();
    if tilt >= PLANAR_SNAP_TOL {
        return Err(SceneError::NonPlanarPose {
            object_id,
            tilt_deg: tilt.to_degrees(),
        });
    }
    let mut next = state.clone();
    next.objects[idx].pose = snap_planar(&raw);
    Ok(next)
}

/// Apply one relative transform per object simultaneously, without any
/// collision checking. Poses are snapped to planar unconditionally; objects
/// missing from the map stay put.
pub fn teleport_all(
    state: &SceneState,
    transforms: &BTreeMap<i32, RigidTransform>,
) -> SceneState {
    let mut next = state.clone();
    for obj in &mut next.objects {
        if let Some(t) = transforms.get(&obj.model.id) {
            obj.pose = snap_planar(&t.compose(&obj.pose));
        }
    }
    next
}

/// World→camera transform for a camera `distance` meters from the table
/// center at the given elevation angle, looking at the center. The camera
/// frame is +x right, +y down, +z forward.
pub fn tabletop_camera(
    table_center: Vector2<f64>,
    elevation: f64,
    distance: f64,
) -> RigidTransform {
    let center = Vector3::new(table_center.x, table_center.y, 0.0);
    let eye = center + distance * Vector3::new(-elevation.cos(), 0.0, elevation.sin());
    let forward = (center - eye).normalize();
    let x_cam = forward.cross(&Vector3::z()).normalize();
    let y_cam = forward.cross(&x_cam);
    let rotation = nalgebra::Matrix3::from_rows(&[
        x_cam.transpose(),
        y_cam.transpose(),
        forward.transpose(),
    ]);
    RigidTransform::new(rotation, -(rotation * eye))
}
