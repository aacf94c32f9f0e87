//! Primitive object shapes with deterministic surface sampling.
//!
//! Objects are boxes and cylinders resting on the table plane: the object
//! frame has z = 0 at the base, +z up, and the footprint centered on the
//! origin. Surface points are sampled on a fixed offset grid so that model
//! construction is a pure function of the dimensions and sampling density —
//! no randomness, bit-identical across runs.

use nalgebra::{Vector2, Vector3};

use crate::geometry::{Frame, PointSet};
use crate::scene::polygon::ConvexPolygon;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { width: f64, depth: f64, height: f64 },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { height, .. } | Shape::Cylinder { height, .. } => height,
        }
    }

    /// Radius of the smallest circle containing the footprint.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { width, depth, .. } => (width * width + depth * depth).sqrt() / 2.0,
            Shape::Cylinder { radius, .. } => radius,
        }
    }

    /// Sample the shape surface at roughly `samples_per_m2` points per square
    /// meter using per-face offset grids.
    pub fn sample_surface(&self, samples_per_m2: f64) -> PointSet {
        let spacing = 1.0 / samples_per_m2.sqrt();
        let mut points = Vec::new();
        match *self {
            Shape::Box {
                width,
                depth,
                height,
            } => {
                let (hw, hd) = (width / 2.0, depth / 2.0);
                // Horizontal faces (z = height, z = 0).
                for z in [height, 0.0] {
                    grid_2d(width, depth, spacing, |x, y| {
                        points.push(Vector3::new(x - hw, y - hd, z));
                    });
                }
                // Faces normal to x.
                for x in [hw, -hw] {
                    grid_2d(depth, height, spacing, |y, z| {
                        points.push(Vector3::new(x, y - hd, z));
                    });
                }
                // Faces normal to y.
                for y in [hd, -hd] {
                    grid_2d(width, height, spacing, |x, z| {
                        points.push(Vector3::new(x - hw, y, z));
                    });
                }
            }
            Shape::Cylinder { radius, height } => {
                // Discs (z = height, z = 0): grid restricted to the circle.
                for z in [height, 0.0] {
                    grid_2d(2.0 * radius, 2.0 * radius, spacing, |x, y| {
                        let (x, y) = (x - radius, y - radius);
                        if x * x + y * y <= radius * radius {
                            points.push(Vector3::new(x, y, z));
                        }
                    });
                }
                // Lateral wall: angular steps sized to the grid spacing.
                let n_theta = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize)
                    .max(8);
                let n_z = ((height / spacing).ceil() as usize).max(1);
                for iz in 0..n_z {
                    let z = (iz as f64 + 0.5) * height / n_z as f64;
                    for it in 0..n_theta {
                        let theta = 2.0 * std::f64::consts::PI * it as f64 / n_theta as f64;
                        points.push(Vector3::new(radius * theta.cos(), radius * theta.sin(), z));
                    }
                }
            }
        }
        PointSet::new(Frame::Object, points)
    }
}

fn grid_2d(extent_a: f64, extent_b: f64, spacing: f64, mut emit: impl FnMut(f64, f64)) {
    let na = ((extent_a / spacing).ceil() as usize).max(1);
    let nb = ((extent_b / spacing).ceil() as usize).max(1);
    for ia in 0..na {
        let a = (ia as f64 + 0.5) * extent_a / na as f64;
        for ib in 0..nb {
            let b = (ib as f64 + 0.5) * extent_b / nb as f64;
            emit(a, b);
        }
    }
}

/// An object instance: identity, geometry, sampled surface, and the convex
/// footprint used for collision checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub id: i32,
    pub shape: Shape,
    pub surface_points: PointSet,
    pub footprint: ConvexPolygon,
}

impl ObjectModel {
    pub fn new(id: i32, shape: Shape, samples_per_m2: f64) -> Self {
        let surface_points = shape.sample_surface(samples_per_m2);
        let footprint = ConvexPolygon::hull_of(
            surface_points
                .points()
                .iter()
                .map(|p| Vector2::new(p.x, p.y))
                .collect(),
        );
        Self {
            id,
            shape,
            surface_points,
            footprint,
        }
    }
}
