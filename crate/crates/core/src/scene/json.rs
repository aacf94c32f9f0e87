//! Scene-pair JSON wire format.
//!
//! The document layout is fixed; see the repository README for the full
//! field reference. Poses are written as 3×3 rotation rows plus a
//! translation vector, all in meters/radians.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::scene::polygon::Rect;
use crate::scene::shape::{ObjectModel, Shape};
use crate::scene::{PlacedObject, ScenePair, SceneState};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformJson {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for TransformJson {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [
                [r.m11, r.m12, r.m13],
                [r.m21, r.m22, r.m23],
                [r.m31, r.m32, r.m33],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TransformJson {
    pub fn to_transform(&self) -> RigidTransform {
        let r = self.rotation;
        RigidTransform::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::new(self.translation[0], self.translation[1], self.translation[2]),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectJson {
    pub id: i32,
    pub shape: Shape,
    pub pose: TransformJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneJson {
    pub objects: Vec<ObjectJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtTransformJson {
    pub object_id: i32,
    pub transform: TransformJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenePairJson {
    pub samples_per_m2: f64,
    pub table_bounds: Rect,
    pub camera_pose: TransformJson,
    pub current: SceneJson,
    pub goal: SceneJson,
    pub gt_transforms: Vec<GtTransformJson>,
}

fn scene_to_json(state: &SceneState) -> SceneJson {
    SceneJson {
        objects: state
            .objects
            .iter()
            .map(|o| ObjectJson {
                id: o.model.id,
                shape: o.model.shape,
                pose: (&o.pose).into(),
            })
            .collect(),
    }
}

impl ScenePairJson {
    pub fn from_pair(pair: &ScenePair) -> Self {
        Self {
            samples_per_m2: pair.current.samples_per_m2,
            table_bounds: pair.current.table_bounds,
            camera_pose: (&pair.current.camera_pose).into(),
            current: scene_to_json(&pair.current),
            goal: scene_to_json(&pair.goal),
            gt_transforms: pair
                .gt_transforms
                .iter()
                .map(|(&object_id, t)| GtTransformJson {
                    object_id,
                    transform: t.into(),
                })
                .collect(),
        }
    }

    /// Rebuild the runtime pair; object models are resampled from the stored
    /// shapes at the stored density, which reproduces them exactly.
    pub fn to_pair(&self) -> ScenePair {
        let camera_pose = self.camera_pose.to_transform();
        let build_state = |scene: &SceneJson| SceneState {
            objects: scene
                .objects
                .iter()
                .map(|o| PlacedObject {
                    model: Arc::new(ObjectModel::new(o.id, o.shape, self.samples_per_m2)),
                    pose: o.pose.to_transform(),
                })
                .collect(),
            table_bounds: self.table_bounds,
            camera_pose,
            samples_per_m2: self.samples_per_m2,
        };
        ScenePair {
            current: build_state(&self.current),
            goal: build_state(&self.goal),
            gt_transforms: self
                .gt_transforms
                .iter()
                .map(|g| (g.object_id, g.transform.to_transform()))
                .collect::<BTreeMap<_, _>>(),
        }
    }
}
