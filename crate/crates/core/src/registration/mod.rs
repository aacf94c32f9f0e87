//! Per-object rigid transform estimation from point correspondences:
//! closed-form SVD fits, a planar (yaw-only) variant, and RANSAC outlier
//! rejection around either.

pub mod ransac;
pub mod solver;

use nalgebra::{Matrix3, Unit, Vector3};
use thiserror::Error;

use crate::geometry::RigidTransform;

pub use ransac::{ransac_fit, RansacConfig};
pub use solver::{FullSe3Solver, PlanarSolver, TransformSolver};

#[derive(Debug, Error, PartialEq)]
pub enum RegistrationError {
    #[error("degenerate correspondence geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("{found} correspondences, but at least {required} required")]
    TooFewCorrespondences { found: usize, required: usize },
    #[error("no consensus: best sample explains {best_inliers} inliers, need {min_inliers}")]
    NoConsensus {
        best_inliers: usize,
        min_inliers: usize,
    },
}

/// Which rotation family a fit was constrained to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    FullSe3,
    Planar,
}

/// Robust fit output: the camera-frame transform, per-correspondence inlier
/// mask, and the RMS residual over inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub transform: RigidTransform,
    pub inlier_mask: Vec<bool>,
    pub rms_residual: f64,
    pub mode: FitMode,
}

impl FitResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

/// Least-squares rigid alignment of index-paired point sets (Kabsch):
/// `R = V·diag(1,1,det(VUᵀ))·Uᵀ` from the SVD of the centered
/// cross-covariance, translation from the centroids. Globally optimal, with
/// the determinant sign folded in so the result is always a proper rotation.
pub fn kabsch(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<RigidTransform, RegistrationError> {
    assert_eq!(source.len(), target.len());
    if source.len() < 3 {
        return Err(RegistrationError::DegenerateGeometry(
            "fewer than 3 correspondences",
        ));
    }
    let n = source.len() as f64;
    let mu_s: Vector3<f64> = source.iter().sum::<Vector3<f64>>() / n;
    let mu_t: Vector3<f64> = target.iter().sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - mu_s) * (t - mu_t).transpose();
    }
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    if sv[0] <= 0.0 || sv[1] < 1e-12 * sv[0] {
        return Err(RegistrationError::DegenerateGeometry(
            "correspondences are collinear or coincident",
        ));
    }
    let u = svd.u.expect("3x3 SVD produces U");
    let v_t = svd.v_t.expect("3x3 SVD produces Vᵀ");
    let d = (u * v_t).determinant();
    let mut fix = Matrix3::identity();
    fix.m33 = if d < 0.0 { -1.0 } else { 1.0 };
    let rotation = v_t.transpose() * fix * u.transpose();
    Ok(RigidTransform::new(rotation, mu_t - rotation * mu_s))
}

/// Rigid alignment constrained to a rotation about `normal`: the yaw is the
/// 2D Kabsch angle of the centered points projected into the plane,
/// `atan2(Σ cross, Σ dot)`; the translation is the full 3D centroid residual.
pub fn kabsch_planar(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    normal: &Unit<Vector3<f64>>,
) -> Result<RigidTransform, RegistrationError> {
    assert_eq!(source.len(), target.len());
    if source.len() < 2 {
        return Err(RegistrationError::DegenerateGeometry(
            "fewer than 2 correspondences",
        ));
    }
    let n = source.len() as f64;
    let mu_s: Vector3<f64> = source.iter().sum::<Vector3<f64>>() / n;
    let mu_t: Vector3<f64> = target.iter().sum::<Vector3<f64>>() / n;

    // Right-handed in-plane basis {e1, e2, normal}.
    let seed = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = normal.cross(&seed).normalize();
    let e2 = normal.cross(&e1);
    // {e1, e2, n} right-handed requires e1 × e2 = n; flip e2 if needed.
    let e2 = if e1.cross(&e2).dot(normal) > 0.0 { e2 } else { -e2 };

    let mut sum_dot = 0.0;
    let mut sum_cross = 0.0;
    let mut max_radius: f64 = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s - mu_s;
        let tc = t - mu_t;
        let a = (sc.dot(&e1), sc.dot(&e2));
        let b = (tc.dot(&e1), tc.dot(&e2));
        sum_dot += a.0 * b.0 + a.1 * b.1;
        sum_cross += a.0 * b.1 - a.1 * b.0;
        max_radius = max_radius.max(a.0.hypot(a.1));
    }
    if max_radius < 1e-9 {
        return Err(RegistrationError::DegenerateGeometry(
            "in-plane points coincide with their centroid",
        ));
    }
    let yaw = sum_cross.atan2(sum_dot);
    let rotation = *nalgebra::Rotation3::from_axis_angle(normal, yaw).matrix();
    Ok(RigidTransform::new(rotation, mu_t - rotation * mu_s))
}

/// Conjugate a camera-frame relative transform into the world frame:
/// `X_world = C⁻¹ · X_cam · C` with `C` the world→camera pose.
pub fn camera_to_world(x_cam: &RigidTransform, camera_pose: &RigidTransform) -> RigidTransform {
    camera_pose
        .invert()
        .compose(x_cam)
        .compose(camera_pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                )
            })
            .collect()
    }

    fn planar_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                    0.02,
                )
            })
            .collect()
    }

    fn transform_error(a: &RigidTransform, b: &RigidTransform) -> (f64, f64) {
        (
            a.rotation_distance_to(b),
            (a.translation - b.translation).norm(),
        )
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_cloud(&mut rng, 50, 0.3);
        let fit = kabsch(&pts, &pts).unwrap();
        assert!(fit.rotation_distance_to(&RigidTransform::identity()) < 1e-12);
        assert!(fit.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_known_planar_transform_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let source = random_cloud(&mut rng, 100, 0.2);
        let truth = RigidTransform::planar(0.21, -0.13, 0.9);
        let target: Vec<_> = source.iter().map(|p| truth.apply_point(p)).collect();
        let fit = kabsch(&source, &target).unwrap();
        let (rot_err, trans_err) = transform_error(&fit, &truth);
        assert!(rot_err < 1e-9 && trans_err < 1e-9);
    }

    #[test]
    fn two_points_are_degenerate() {
        let pts = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            kabsch(&pts, &pts),
            Err(RegistrationError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..20)
            .map(|i| Vector3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        assert!(matches!(
            kabsch(&pts, &pts),
            Err(RegistrationError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn planar_source_keeps_det_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let source = planar_cloud(&mut rng, 40, 0.15);
            let truth = crate::testing::random_transform(&mut rng);
            let target: Vec<_> = source.iter().map(|p| truth.apply_point(p)).collect();
            let fit = kabsch(&source, &target).unwrap();
            assert!((fit.rotation.determinant() - 1.0).abs() < 1e-9);
            let (rot_err, trans_err) = transform_error(&fit, &truth);
            assert!(rot_err < 1e-8 && trans_err < 1e-8);
        }
    }

    #[test]
    fn kabsch_is_equivariant_under_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let source = random_cloud(&mut rng, 60, 0.25);
            let x = crate::testing::random_transform(&mut rng);
            let target: Vec<_> = source.iter().map(|p| x.apply_point(p)).collect();
            let q = crate::testing::random_transform(&mut rng);

            let rotated_source: Vec<_> = source.iter().map(|p| q.apply_point(p)).collect();
            let rotated_target: Vec<_> = target.iter().map(|p| q.apply_point(p)).collect();
            let fit = kabsch(&rotated_source, &rotated_target).unwrap();
            let expected = q.compose(&x).compose(&q.invert());
            let (rot_err, trans_err) = transform_error(&fit, &expected);
            assert!(rot_err < 1e-9 && trans_err < 1e-9);
        }
    }

    #[test]
    fn kabsch_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let source = random_cloud(&mut rng, 100, 0.2);
        let truth = crate::testing::random_transform(&mut rng);
        // Small noise so the optimum is not exactly the truth.
        let target: Vec<_> = source
            .iter()
            .map(|p| {
                truth.apply_point(p)
                    + Vector3::new(
                        rng.random_range(-0.002..0.002),
                        rng.random_range(-0.002..0.002),
                        rng.random_range(-0.002..0.002),
                    )
            })
            .collect();
        let fit = kabsch(&source, &target).unwrap();
        let sum_sq = |t: &RigidTransform| -> f64 {
            source
                .iter()
                .zip(&target)
                .map(|(s, tg)| (t.apply_point(s) - tg).norm_squared())
                .sum()
        };
        let best = sum_sq(&fit);
        for _ in 0..10_000 {
            let axis = nalgebra::Unit::new_normalize(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0f64),
            ));
            let mut perturbed =
                RigidTransform::from_axis_angle(&axis, rng.random_range(-0.05..0.05))
                    .compose(&fit);
            perturbed.translation += Vector3::new(
                rng.random_range(-0.005..0.005),
                rng.random_range(-0.005..0.005),
                rng.random_range(-0.005..0.005),
            );
            assert!(sum_sq(&perturbed) >= best - 1e-15);
        }
    }

    #[test]
    fn planar_identity_and_known_yaw() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let source = planar_cloud(&mut rng, 80, 0.2);
        let normal = Vector3::z_axis();
        let identity = kabsch_planar(&source, &source, &normal).unwrap();
        assert!(identity.rotation_angle() < 1e-12);
        assert!(identity.translation.norm() < 1e-12);

        let truth = RigidTransform::planar(0.08, 0.03, 37f64.to_radians());
        let target: Vec<_> = source.iter().map(|p| truth.apply_point(p)).collect();
        let fit = kabsch_planar(&source, &target, &normal).unwrap();
        let (rot_err, trans_err) = transform_error(&fit, &truth);
        assert!(rot_err < 1e-9 && trans_err < 1e-9);
    }

    #[test]
    fn planar_fit_rotates_only_about_the_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let source = planar_cloud(&mut rng, 60, 0.2);
        let truth = RigidTransform::planar(0.0, 0.0, 0.6);
        // Inject out-of-plane tilt into the target.
        let tilt = RigidTransform::from_axis_angle(&Vector3::x_axis(), 0.05);
        let target: Vec<_> = source
            .iter()
            .map(|p| tilt.apply_point(&truth.apply_point(p)))
            .collect();
        let normal = Vector3::z_axis();
        let fit = kabsch_planar(&source, &target, &normal).unwrap();
        // The returned rotation must leave the normal fixed.
        let moved = fit.rotation * normal.into_inner();
        assert!((moved.dot(&normal) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_coincident_points_are_degenerate() {
        let pts = vec![Vector3::new(0.1, 0.1, 0.0); 10];
        assert!(matches!(
            kabsch_planar(&pts, &pts, &Vector3::z_axis()),
            Err(RegistrationError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn camera_conjugation_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cam = crate::testing::random_transform(&mut rng);
        let id = RigidTransform::identity();
        let back = camera_to_world(&id, &cam);
        assert!(back.rotation_angle() < 1e-12 && back.translation.norm() < 1e-12);

        let x = crate::testing::random_transform(&mut rng);
        let same = camera_to_world(&x, &RigidTransform::identity());
        assert!((same.rotation - x.rotation).norm() < 1e-12);
        assert!((same.translation - x.translation).norm() < 1e-12);

        // Points transported through the camera agree with the world transform.
        let x_world = camera_to_world(&x, &cam);
        let p_world = Vector3::new(0.2, -0.1, 0.05);
        let via_cam = cam
            .invert()
            .apply_point(&x.apply_point(&cam.apply_point(&p_world)));
        assert_abs_diff_eq!(x_world.apply_point(&p_world), via_cam, epsilon = 1e-12);
    }
}
