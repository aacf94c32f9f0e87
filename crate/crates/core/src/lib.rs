//! Deterministic core of a flow-based tabletop rearrangement system.
//!
//! Given paired observations of a current and a goal scene, the pipeline
//! estimates per-object rigid transforms from dense correspondences and
//! greedily plans collision-free pick-and-place actions until the scenes
//! match. A learned flow network and segmentation model are stood in for by
//! a synthetic oracle with a controllable corruption model, which makes
//! every stage reproducible and testable in isolation.
//!
//! Module map:
//! - [`geometry`] — pinhole camera, point sets, SE(3) transforms.
//! - [`scene`] — scene generation, point-splat rendering, action application.
//! - [`flow`] — ground-truth flow, corruption, object matching, 3D
//!   correspondences.
//! - [`registration`] — Kabsch / planar-Kabsch solvers and RANSAC.
//! - [`planner`] — scoring, collision checks, greedy action selection.
//! - [`pipeline`] — the observe–estimate–plan–act loop, experiments, metrics.
//! - [`registry`] — runtime-selectable solver and policy strategies.

pub mod flow;
pub mod geometry;
pub mod grid;
pub mod pipeline;
pub mod planner;
pub mod registration;
pub mod registry;
pub mod scene;
pub mod seeds;

#[cfg(test)]
pub(crate) mod testing;
