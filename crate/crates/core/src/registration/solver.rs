//! Transform-solver strategies: every rotation family the fitter can be
//! constrained to sits behind one trait so the estimation pipeline is
//! generic over it. Solvers are selected by name through [`crate::registry`].

use nalgebra::{Unit, Vector3};

use super::{kabsch, kabsch_planar, FitMode, RegistrationError};
use crate::geometry::RigidTransform;

/// Closed-form rigid fit over index-paired points, used both for RANSAC
/// minimal samples and for the final refit.
pub trait TransformSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn mode(&self) -> FitMode;
    fn solve(
        &self,
        source: &[Vector3<f64>],
        target: &[Vector3<f64>],
    ) -> Result<RigidTransform, RegistrationError>;
}

/// Unconstrained SE(3) fit (full Kabsch).
#[derive(Debug, Clone, Copy, Default)]
pub struct FullSe3Solver;

impl TransformSolver for FullSe3Solver {
    fn name(&self) -> &'static str {
        "full_se3"
    }

    fn mode(&self) -> FitMode {
        FitMode::FullSe3
    }

    fn solve(
        &self,
        source: &[Vector3<f64>],
        target: &[Vector3<f64>],
    ) -> Result<RigidTransform, RegistrationError> {
        kabsch(source, target)
    }
}

/// Fit constrained to rotate only about the table normal (yaw), exploiting
/// the planarity of tabletop rearrangement.
#[derive(Debug, Clone, Copy)]
pub struct PlanarSolver {
    /// Table normal expressed in the frame of the correspondences.
    pub normal: Unit<Vector3<f64>>,
}

impl PlanarSolver {
    pub fn new(normal: Unit<Vector3<f64>>) -> Self {
        Self { normal }
    }
}

impl TransformSolver for PlanarSolver {
    fn name(&self) -> &'static str {
        "planar"
    }

    fn mode(&self) -> FitMode {
        FitMode::Planar
    }

    fn solve(
        &self,
        source: &[Vector3<f64>],
        target: &[Vector3<f64>],
    ) -> Result<RigidTransform, RegistrationError> {
        kabsch_planar(source, target, &self.normal)
    }
}
