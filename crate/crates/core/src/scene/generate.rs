//! Randomized scene-pair generation.
//!
//! A goal layout is placed first by rejection sampling; the current layout
//! is then derived by giving every object a random planar transform, again
//! rejection-sampled until collision-free. Everything is drawn from one
//! seeded stream, so a pair is a pure function of (config, seed).

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::RigidTransform;
use crate::scene::polygon::{ConvexPolygon, Rect};
use crate::scene::shape::{ObjectModel, Shape};
use crate::scene::{tabletop_camera, PlacedObject, SceneError, ScenePair, SceneState};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub table_bounds: Rect,
    /// Yaw range (radians) of the per-object current→goal transform.
    pub yaw_range: (f64, f64),
    pub box_side_range: (f64, f64),
    pub box_height_range: (f64, f64),
    pub cylinder_radius_range: (f64, f64),
    pub cylinder_height_range: (f64, f64),
    /// Surface sampling density for object models and the table plane.
    pub samples_per_m2: f64,
    /// Minimum footprint separation between any two objects.
    pub clearance: f64,
    pub max_attempts: usize,
    pub camera_elevation: f64,
    pub camera_distance: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            min_objects: 1,
            max_objects: 9,
            table_bounds: Rect::centered(0.35, 0.35),
            yaw_range: (-std::f64::consts::PI, std::f64::consts::PI),
            box_side_range: (0.04, 0.10),
            box_height_range: (0.03, 0.10),
            cylinder_radius_range: (0.02, 0.05),
            cylinder_height_range: (0.03, 0.10),
            samples_per_m2: 4.0e5,
            clearance: 0.005,
            max_attempts: 1000,
            camera_elevation: std::f64::consts::FRAC_PI_4,
            camera_distance: 1.0,
        }
    }
}

impl GenerationConfig {
    fn validate(&self) -> Result<(), SceneError> {
        if self.min_objects < 1 || self.max_objects < self.min_objects {
            return Err(SceneError::InvalidConfig(format!(
                "object count range [{}, {}] is invalid",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_objects > 9 {
            return Err(SceneError::InvalidConfig(format!(
                "max_objects {} exceeds the supported 9",
                self.max_objects
            )));
        }
        if self.table_bounds.is_degenerate() {
            return Err(SceneError::InvalidConfig("degenerate table bounds".into()));
        }
        if self.yaw_range.1 < self.yaw_range.0 {
            return Err(SceneError::InvalidConfig("empty yaw range".into()));
        }
        Ok(())
    }
}

fn sample_shape(rng: &mut ChaCha8Rng, cfg: &GenerationConfig) -> Shape {
    if rng.random_bool(0.5) {
        Shape::Box {
            width: rng.random_range(cfg.box_side_range.0..=cfg.box_side_range.1),
            depth: rng.random_range(cfg.box_side_range.0..=cfg.box_side_range.1),
            height: rng.random_range(cfg.box_height_range.0..=cfg.box_height_range.1),
        }
    } else {
        Shape::Cylinder {
            radius: rng.random_range(cfg.cylinder_radius_range.0..=cfg.cylinder_radius_range.1),
            height: rng.random_range(cfg.cylinder_height_range.0..=cfg.cylinder_height_range.1),
        }
    }
}

/// Rejection-sample a collision-free planar pose for `model`. `sample_yaw`
/// supplies the yaw for each attempt so goal and current placement can use
/// different distributions.
fn place_object(
    rng: &mut ChaCha8Rng,
    model: &ObjectModel,
    placed: &[ConvexPolygon],
    cfg: &GenerationConfig,
    mut sample_yaw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<RigidTransform, SceneError> {
    let b = &cfg.table_bounds;
    for _ in 0..cfg.max_attempts {
        let x = rng.random_range(b.min_x..=b.max_x);
        let y = rng.random_range(b.min_y..=b.max_y);
        let yaw = sample_yaw(rng);
        let pose = RigidTransform::planar(x, y, yaw);
        let fp = model.footprint.transformed(&pose);
        let clear = fp.within_rect(b)
            && placed.iter().all(|other| fp.distance_to(other) >= cfg.clearance);
        if clear {
            return Ok(pose);
        }
    }
    Err(SceneError::PlacementFailure {
        object_id: model.id,
        attempts: cfg.max_attempts,
    })
}

pub fn generate_scene_pair(cfg: &GenerationConfig, seed: u64) -> Result<ScenePair, SceneError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(cfg.min_objects..=cfg.max_objects);

    let models: Vec<Arc<ObjectModel>> = (0..count)
        .map(|i| {
            let shape = sample_shape(&mut rng, cfg);
            Arc::new(ObjectModel::new(i as i32, shape, cfg.samples_per_m2))
        })
        .collect();

    // Goal layout: free yaw.
    let mut goal_poses = Vec::with_capacity(count);
    let mut goal_footprints: Vec<ConvexPolygon> = Vec::with_capacity(count);
    for model in &models {
        let pose = place_object(&mut rng, model, &goal_footprints, cfg, |rng| {
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
        })?;
        goal_footprints.push(model.footprint.transformed(&pose));
        goal_poses.push(pose);
    }

    // Current layout: yaw offset from the goal constrained to the configured
    // range, so the current→goal transform's yaw lies in `yaw_range`.
    let mut current_poses = Vec::with_capacity(count);
    let mut current_footprints: Vec<ConvexPolygon> = Vec::with_capacity(count);
    for (model, goal_pose) in models.iter().zip(&goal_poses) {
        let goal_yaw = goal_pose.yaw_projection();
        let (lo, hi) = cfg.yaw_range;
        let pose = place_object(&mut rng, model, &current_footprints, cfg, |rng| {
            let delta = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            goal_yaw - delta
        })?;
        current_footprints.push(model.footprint.transformed(&pose));
        current_poses.push(pose);
    }

    let gt_transforms: BTreeMap<i32, RigidTransform> = models
        .iter()
        .enumerate()
        .map(|(i, model)| {
            (model.id, goal_poses[i].compose(&current_poses[i].invert()))
        })
        .collect();

    let camera_pose = tabletop_camera(
        cfg.table_bounds.center(),
        cfg.camera_elevation,
        cfg.camera_distance,
    );
    let make_state = |poses: Vec<RigidTransform>| SceneState {
        objects: models
            .iter()
            .zip(poses)
            .map(|(model, pose)| PlacedObject {
                model: Arc::clone(model),
                pose,
            })
            .collect(),
        table_bounds: cfg.table_bounds,
        camera_pose,
        samples_per_m2: cfg.samples_per_m2,
    };

    Ok(ScenePair {
        current: make_state(current_poses),
        goal: make_state(goal_poses),
        gt_transforms,
    })
}

/// Minimum pairwise footprint distance in a state, or +inf with <2 objects.
pub fn min_pairwise_clearance(state: &SceneState) -> f64 {
    let fps: Vec<ConvexPolygon> = state.objects.iter().map(|o| o.world_footprint()).collect();
    let mut best = f64::INFINITY;
    for i in 0..fps.len() {
        for j in (i + 1)..fps.len() {
            best = best.min(fps[i].distance_to(&fps[j]));
        }
    }
    best
}
