//! Name-keyed registries for the runtime-selectable strategies: transform
//! solvers (rotation model) and execution policies (episode mode). The CLI
//! and config files refer to strategies by these names.

use nalgebra::{Unit, Vector3};
use thiserror::Error;

use crate::pipeline::policy::{ExecutionPolicy, FullPipelinePolicy, OraclePolicy, TeleportPolicy};
use crate::registration::{FullSe3Solver, PlanarSolver, TransformSolver};

#[derive(Debug, Error, PartialEq)]
#[error("unknown {kind} '{name}'; available: {available}")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

/// Context a solver may need at construction time.
#[derive(Debug, Clone, Copy)]
pub struct SolverContext {
    /// Table normal expressed in the frame the correspondences live in.
    pub table_normal_in_camera: Unit<Vector3<f64>>,
}

pub struct SolverEntry {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn(&SolverContext) -> Box<dyn TransformSolver>,
}

static SOLVERS: &[SolverEntry] = &[
    SolverEntry {
        name: "planar",
        summary: "rotation constrained to the table normal (yaw only)",
        build: |ctx| Box::new(PlanarSolver::new(ctx.table_normal_in_camera)),
    },
    SolverEntry {
        name: "full_se3",
        summary: "unconstrained SE(3) fit",
        build: |_| Box::new(FullSe3Solver),
    },
];

pub fn solvers() -> &'static [SolverEntry] {
    SOLVERS
}

pub fn build_solver(
    name: &str,
    ctx: &SolverContext,
) -> Result<Box<dyn TransformSolver>, UnknownStrategy> {
    SOLVERS
        .iter()
        .find(|e| e.name == name)
        .map(|e| (e.build)(ctx))
        .ok_or_else(|| UnknownStrategy {
            kind: "rotation mode",
            name: name.to_string(),
            available: names(SOLVERS.iter().map(|e| e.name)),
        })
}

pub struct PolicyEntry {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Box<dyn ExecutionPolicy>,
}

static POLICIES: &[PolicyEntry] = &[
    PolicyEntry {
        name: "full_pipeline",
        summary: "estimate transforms and plan one collision-checked action per round",
        build: || Box::new(FullPipelinePolicy),
    },
    PolicyEntry {
        name: "teleport_baseline",
        summary: "apply all estimated transforms at once, no collision checks",
        build: || Box::new(TeleportPolicy),
    },
    PolicyEntry {
        name: "oracle_transforms",
        summary: "plan over ground-truth transforms, bypassing estimation",
        build: || Box::new(OraclePolicy),
    },
];

pub fn policies() -> &'static [PolicyEntry] {
    POLICIES
}

pub fn build_policy(name: &str) -> Result<Box<dyn ExecutionPolicy>, UnknownStrategy> {
    POLICIES
        .iter()
        .find(|e| e.name == name)
        .map(|e| (e.build)())
        .ok_or_else(|| UnknownStrategy {
            kind: "execution mode",
            name: name.to_string(),
            available: names(POLICIES.iter().map(|e| e.name)),
        })
}

fn names<'a>(iter: impl Iterator<Item = &'a str>) -> String {
    iter.collect::<Vec<_>>().join(", ")
}
