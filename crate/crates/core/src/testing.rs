//! Shared helpers for unit tests.

use nalgebra::{Unit, Vector3};
use rand::Rng;

use crate::geometry::RigidTransform;

pub(crate) fn random_transform(rng: &mut impl Rng) -> RigidTransform {
    let axis = Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0f64),
    ));
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut t = RigidTransform::from_axis_angle(&axis, angle);
    t.translation = Vector3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
    );
    t
}
