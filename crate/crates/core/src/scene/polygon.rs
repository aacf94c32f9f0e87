//! 2D convex polygons for object footprints and table-plane collision tests.

use nalgebra::Vector2;

use crate::geometry::RigidTransform;

/// Axis-aligned rectangle in world xy, meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn centered(half_x: f64, half_y: f64) -> Self {
        Self {
            min_x: -half_x,
            min_y: -half_y,
            max_x: half_x,
            max_y: half_y,
        }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        self.min_x <= p.x && p.x <= self.max_x && self.min_y <= p.y && p.y <= self.max_y
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn is_degenerate(&self) -> bool {
        self.max_x <= self.min_x || self.max_y <= self.min_y
    }
}

/// Convex polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vector2<f64>>,
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    /// Convex hull of a point cloud (Andrew monotone chain, strict turns so
    /// collinear interior points are dropped).
    pub fn hull_of(mut points: Vec<Vector2<f64>>) -> Self {
        points.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
        points.dedup_by(|a, b| a.x == b.x && a.y == b.y);
        if points.len() < 3 {
            return Self { vertices: points };
        }
        let mut lower: Vec<Vector2<f64>> = Vec::new();
        for p in &points {
            while lower.len() >= 2
                && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vector2<f64>> = Vec::new();
        for p in points.iter().rev() {
            while upper.len() >= 2
                && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self { vertices: lower }
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    /// Footprint moved by the xy part of a (planar) rigid transform.
    pub fn transformed(&self, pose: &RigidTransform) -> Self {
        let r = &pose.rotation;
        let t = Vector2::new(pose.translation.x, pose.translation.y);
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| Vector2::new(r.m11 * v.x + r.m12 * v.y, r.m21 * v.x + r.m22 * v.y) + t)
                .collect(),
        }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        if self.vertices.len() < 3 {
            return false;
        }
        let n = self.vertices.len();
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= -1e-12)
    }

    pub fn within_rect(&self, rect: &Rect) -> bool {
        self.vertices.iter().all(|v| rect.contains(v))
    }

    fn project_onto(&self, axis: &Vector2<f64>) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.vertices {
            let d = v.dot(axis);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Separating-axis overlap test over both polygons' edge normals.
    pub fn intersects(&self, other: &Self) -> bool {
        for poly in [self, other] {
            let n = poly.vertices.len();
            for i in 0..n {
                let a = poly.vertices[i];
                let b = poly.vertices[(i + 1) % n];
                let edge = b - a;
                let axis = Vector2::new(-edge.y, edge.x);
                let (lo1, hi1) = self.project_onto(&axis);
                let (lo2, hi2) = other.project_onto(&axis);
                if hi1 < lo2 || hi2 < lo1 {
                    return false;
                }
            }
        }
        true
    }

    /// Minimum distance between the two polygons; zero when they overlap.
    /// For disjoint convex polygons the minimum is attained at a vertex of
    /// one against an edge of the other, so those pairs are sufficient.
    pub fn distance_to(&self, other: &Self) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for v in &self.vertices {
            best = best.min(other.boundary_distance(v));
        }
        for v in &other.vertices {
            best = best.min(self.boundary_distance(v));
        }
        best
    }

    fn boundary_distance(&self, p: &Vector2<f64>) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => (p - self.vertices[0]).norm(),
            _ => {
                let n = self.vertices.len();
                (0..n)
                    .map(|i| {
                        point_segment_distance(p, &self.vertices[i], &self.vertices[(i + 1) % n])
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn point_segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
