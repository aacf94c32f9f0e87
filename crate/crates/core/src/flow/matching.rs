//! Object identity matching across scenes and flow-derived 3D
//! correspondences.
//!
//! Segment labels are arbitrary on either side (a label-agnostic segmenter
//! assigns them independently per image), so identities are established by
//! following the flow: each current segment votes with its pixels for the
//! goal segment it lands on.

use std::collections::BTreeMap;

use super::{FlowError, FlowField};
use crate::geometry::{Frame, PointSet};
use crate::scene::Observation;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Minimum share of a segment's valid pixels the winning goal segment
    /// must collect.
    pub min_vote: f64,
    /// Minimum usable correspondences per object.
    pub min_pixels: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            min_vote: 0.5,
            min_pixels: 20,
        }
    }
}

/// Outcome of matching one current segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchOutcome {
    Matched { goal_id: i32, share: f64 },
    /// Winning vote share below `min_vote`.
    Ambiguous { share: f64 },
    /// Lost an injectivity conflict to a segment with a larger share.
    ConflictLost { goal_id: i32, share: f64 },
    /// No valid-flow pixels to vote with.
    NoPixels,
}

/// Per-object matching outcomes, keyed by current segment id.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMatching {
    pub outcomes: BTreeMap<i32, MatchOutcome>,
}

impl ObjectMatching {
    /// The injective current→goal id mapping over confidently matched objects.
    pub fn mapping(&self) -> BTreeMap<i32, i32> {
        self.outcomes
            .iter()
            .filter_map(|(&cur, outcome)| match outcome {
                MatchOutcome::Matched { goal_id, .. } => Some((cur, *goal_id)),
                _ => None,
            })
            .collect()
    }
}

/// Match current segments to goal segments by majority vote over flow
/// landings. The assignment is made injective: when two current segments
/// claim the same goal segment, the larger vote share wins and the loser is
/// marked [`MatchOutcome::ConflictLost`].
pub fn match_objects(
    cur_obs: &Observation,
    goal_obs: &Observation,
    flow: &FlowField,
    cfg: &MatchConfig,
) -> Result<ObjectMatching, FlowError> {
    if cur_obs.intr != goal_obs.intr {
        return Err(FlowError::IntrinsicsMismatch);
    }

    // votes[cur_id][goal_id] over valid pixels; landings on background
    // (goal id −1) count toward the total but can't win.
    let mut votes: BTreeMap<i32, BTreeMap<i32, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<i32, usize> = BTreeMap::new();
    for (u, v, seg) in cur_obs.segments.iter() {
        if seg < 0 {
            continue;
        }
        votes.entry(seg).or_default();
        totals.entry(seg).or_insert(0);
        if let Some((lu, lv)) = flow.landing(u, v) {
            let goal_id = goal_obs.segments.get(lu, lv);
            *votes.get_mut(&seg).unwrap().entry(goal_id).or_insert(0) += 1;
            *totals.get_mut(&seg).unwrap() += 1;
        }
    }

    let mut outcomes: BTreeMap<i32, MatchOutcome> = BTreeMap::new();
    let mut claims: BTreeMap<i32, (i32, f64)> = BTreeMap::new(); // goal → (cur, share)
    for (&cur_id, ballot) in &votes {
        let total = totals[&cur_id];
        if total == 0 {
            outcomes.insert(cur_id, MatchOutcome::NoPixels);
            continue;
        }
        // Best goal id ≥ 0; ties broken toward the smaller id.
        let winner = ballot
            .iter()
            .filter(|(&gid, _)| gid >= 0)
            .max_by(|(ga, na), (gb, nb)| na.cmp(nb).then(gb.cmp(ga)));
        let Some((&goal_id, &count)) = winner else {
            outcomes.insert(cur_id, MatchOutcome::NoPixels);
            continue;
        };
        let share = count as f64 / total as f64;
        if share < cfg.min_vote {
            outcomes.insert(cur_id, MatchOutcome::Ambiguous { share });
            continue;
        }
        match claims.get(&goal_id).copied() {
            None => {
                claims.insert(goal_id, (cur_id, share));
                outcomes.insert(cur_id, MatchOutcome::Matched { goal_id, share });
            }
            Some((holder, holder_share)) => {
                // Injectivity: larger share keeps the claim; ties keep the
                // earlier (smaller) current id.
                if share > holder_share {
                    claims.insert(goal_id, (cur_id, share));
                    outcomes.insert(cur_id, MatchOutcome::Matched { goal_id, share });
                    outcomes.insert(
                        holder,
                        MatchOutcome::ConflictLost {
                            goal_id,
                            share: holder_share,
                        },
                    );
                } else {
                    outcomes.insert(cur_id, MatchOutcome::ConflictLost { goal_id, share });
                }
            }
        }
    }
    Ok(ObjectMatching { outcomes })
}

/// True when the depth neighborhood makes the stored depth untrustworthy
/// for unprojection: a jump against any 4-neighbor (occlusion boundary), a
/// steep gradient (grazing incidence, e.g. a cylinder limb), or a crease
/// (surface-orientation flip, e.g. a top rim, where a pixel footprint
/// straddles two faces). Thresholds are in units of the pixel footprint at
/// this range.
fn on_depth_edge(obs: &Observation, u: usize, v: usize, depth: f64) -> bool {
    let voxel = obs.intr.pixel_size_at(depth);
    let jump_tol = 3.0 * voxel;
    let (u, v) = (u as i64, v as i64);
    let neighbor = |nu: i64, nv: i64| -> Option<f64> {
        if !obs.depth.in_bounds(nu, nv) {
            return None;
        }
        let d = obs.depth.get(nu as usize, nv as usize);
        (d > 0.0 && (d - depth).abs() <= jump_tol).then_some(d)
    };
    let (Some(left), Some(right), Some(up), Some(down)) = (
        neighbor(u - 1, v),
        neighbor(u + 1, v),
        neighbor(u, v - 1),
        neighbor(u, v + 1),
    ) else {
        return true;
    };
    let grad = ((right - left) / 2.0).hypot((down - up) / 2.0);
    if grad > 2.2 * voxel {
        return true;
    }
    let crease = (left + right - 2.0 * depth)
        .abs()
        .max((up + down - 2.0 * depth).abs());
    crease > 1.5 * voxel
}

/// Index-paired camera-frame points for one object: current pixels with
/// valid flow and a depth hit at the landing pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub object_id: i32,
    pub source: PointSet,
    pub target: PointSet,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

/// Build the correspondence set for one matched object: sources are
/// unprojected current segment pixels with valid flow, targets are the
/// continuous flow landings unprojected with the goal depth at the nearest
/// pixel. Landings on a depth discontinuity (neighboring goal depths jump
/// by more than a few pixel footprints) are skipped: the nearest-pixel
/// depth is not trustworthy there.
pub fn correspondences(
    cur_obs: &Observation,
    goal_obs: &Observation,
    flow: &FlowField,
    object_id: i32,
    mapping: &BTreeMap<i32, i32>,
    cfg: &MatchConfig,
) -> Result<CorrespondenceSet, FlowError> {
    if !mapping.contains_key(&object_id) {
        return Err(FlowError::UnmatchedObject { object_id });
    }
    let intr = &cur_obs.intr;
    let mut source = Vec::new();
    let mut target = Vec::new();
    for (u, v, seg) in cur_obs.segments.iter() {
        if seg != object_id {
            continue;
        }
        let d = cur_obs.depth.get(u, v);
        if d <= 0.0 || on_depth_edge(cur_obs, u, v, d) {
            continue;
        }
        let Some((lu, lv)) = flow.landing(u, v) else {
            continue;
        };
        let goal_d = goal_obs.depth.get(lu, lv);
        if goal_d <= 0.0 || on_depth_edge(goal_obs, lu, lv, goal_d) {
            continue;
        }
        source.push(intr.unproject(u as f64, v as f64, d));
        target.push(intr.unproject(
            u as f64 + flow.du.get(u, v),
            v as f64 + flow.dv.get(u, v),
            goal_d,
        ));
    }
    if source.len() < cfg.min_pixels {
        return Err(FlowError::TooFewCorrespondences {
            object_id,
            found: source.len(),
            min: cfg.min_pixels,
        });
    }
    Ok(CorrespondenceSet {
        object_id,
        source: PointSet::new(Frame::Camera, source),
        target: PointSet::new(Frame::Camera, target),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ground_truth_flow;
    use crate::geometry::{CameraIntrinsics, RigidTransform};
    use crate::scene::shape::Shape;
    use crate::scene::{render, tabletop_camera, PlacedObject, Rect, SceneState, ScenePair};
    use crate::scene::shape::ObjectModel;
    use nalgebra::Vector2;
    use std::sync::Arc;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(262.5, 262.5, 159.5, 119.5, 320, 240).unwrap()
    }

    fn small_box() -> Shape {
        Shape::Box {
            width: 0.07,
            depth: 0.07,
            height: 0.04,
        }
    }

    fn state_with(objects: Vec<(i32, Shape, RigidTransform)>) -> SceneState {
        let samples = 1.0e5;
        SceneState {
            objects: objects
                .into_iter()
                .map(|(id, shape, pose)| PlacedObject {
                    model: Arc::new(ObjectModel::new(id, shape, samples)),
                    pose,
                })
                .collect(),
            table_bounds: Rect::centered(0.35, 0.35),
            camera_pose: tabletop_camera(Vector2::zeros(), std::f64::consts::FRAC_PI_4, 1.0),
            samples_per_m2: samples,
        }
    }

    fn pair_of(current: SceneState, goal: SceneState) -> ScenePair {
        let gt_transforms = current
            .objects
            .iter()
            .map(|obj| {
                let goal_pose = goal.pose_of(obj.model.id).unwrap();
                (obj.model.id, goal_pose.compose(&obj.pose.invert()))
            })
            .collect();
        ScenePair {
            current,
            goal,
            gt_transforms,
        }
    }

    #[test]
    fn identical_scenes_map_identity() {
        let state = state_with(vec![
            (0, small_box(), RigidTransform::planar(-0.1, 0.0, 0.0)),
            (1, small_box(), RigidTransform::planar(0.1, 0.1, 0.5)),
        ]);
        let pair = pair_of(state.clone(), state);
        let obs = render(&pair.current, &intr());
        let flow = ground_truth_flow(&pair, &obs, &obs).unwrap();
        let matching = match_objects(&obs, &obs, &flow, &MatchConfig::default()).unwrap();
        let mapping = matching.mapping();
        assert_eq!(mapping.get(&0), Some(&0));
        assert_eq!(mapping.get(&1), Some(&1));
    }

    #[test]
    fn mapping_follows_geometry_not_labels() {
        // Two objects swap places; on top of that the goal segmentation uses
        // swapped labels, so following geometry must recover the relabeling.
        let a = RigidTransform::planar(-0.12, 0.0, 0.0);
        let b = RigidTransform::planar(0.12, 0.0, 0.0);
        let current = state_with(vec![(0, small_box(), a), (1, small_box(), b)]);
        let goal = state_with(vec![(0, small_box(), b), (1, small_box(), a)]);
        let pair = pair_of(current, goal);
        let cur_obs = render(&pair.current, &intr());
        let goal_obs_true = render(&pair.goal, &intr());
        // Relabel goal ids: 0↔1 (what an independent segmenter might emit).
        let relabel: BTreeMap<i32, i32> = [(0, 1), (1, 0)].into_iter().collect();
        let goal_obs = goal_obs_true.relabeled(&relabel);

        let flow = ground_truth_flow(&pair, &cur_obs, &goal_obs_true).unwrap();
        let matching = match_objects(&cur_obs, &goal_obs, &flow, &MatchConfig::default()).unwrap();
        let mapping = matching.mapping();
        // Object 0 moved to where goal label 1 now sits, and vice versa.
        assert_eq!(mapping.get(&0), Some(&1));
        assert_eq!(mapping.get(&1), Some(&0));
    }

    #[test]
    fn matching_is_permutation_equivariant() {
        let current = state_with(vec![
            (0, small_box(), RigidTransform::planar(-0.12, -0.05, 0.0)),
            (1, small_box(), RigidTransform::planar(0.12, 0.05, 0.3)),
        ]);
        let goal = state_with(vec![
            (0, small_box(), RigidTransform::planar(-0.05, 0.1, 0.2)),
            (1, small_box(), RigidTransform::planar(0.1, -0.1, 0.0)),
        ]);
        let pair = pair_of(current, goal);
        let cur_obs = render(&pair.current, &intr());
        let goal_obs = render(&pair.goal, &intr());
        let flow = ground_truth_flow(&pair, &cur_obs, &goal_obs).unwrap();
        let cfg = MatchConfig::default();
        let base = match_objects(&cur_obs, &goal_obs, &flow, &cfg)
            .unwrap()
            .mapping();

        let perm: BTreeMap<i32, i32> = [(0, 5), (1, 3)].into_iter().collect();
        let permuted = match_objects(&cur_obs, &goal_obs.relabeled(&perm), &flow, &cfg)
            .unwrap()
            .mapping();
        for (cur, goal_id) in &base {
            assert_eq!(permuted.get(cur), Some(&perm[goal_id]));
        }
    }

    #[test]
    fn full_outlier_corruption_breaks_matching() {
        use crate::flow::{corrupt, CorruptionModel};
        let state = state_with(vec![
            (0, small_box(), RigidTransform::planar(-0.12, 0.0, 0.0)),
            (1, small_box(), RigidTransform::planar(0.12, 0.0, 0.0)),
        ]);
        let pair = pair_of(state.clone(), state);
        let obs = render(&pair.current, &intr());
        let clean = ground_truth_flow(&pair, &obs, &obs).unwrap();
        let mut failures = 0;
        for seed in 0..10 {
            let model = CorruptionModel {
                outlier_frac: 1.0,
                seed,
                ..Default::default()
            };
            let flow = corrupt(&clean, &model);
            let matching = match_objects(&obs, &obs, &flow, &MatchConfig::default()).unwrap();
            if matching
                .outcomes
                .values()
                .any(|o| !matches!(o, MatchOutcome::Matched { .. }))
            {
                failures += 1;
            }
        }
        // Fully random flow cannot reach the majority-vote threshold.
        assert_eq!(failures, 10);
    }

    #[test]
    fn identity_pair_correspondences_are_near_equal() {
        let state = state_with(vec![(0, small_box(), RigidTransform::planar(0.05, 0.0, 0.0))]);
        let pair = pair_of(state.clone(), state);
        let obs = render(&pair.current, &intr());
        let flow = ground_truth_flow(&pair, &obs, &obs).unwrap();
        let mapping: BTreeMap<i32, i32> = [(0, 0)].into_iter().collect();
        let cfg = MatchConfig::default();
        let corr = correspondences(&obs, &obs, &flow, 0, &mapping, &cfg).unwrap();
        assert!(corr.len() >= cfg.min_pixels);
        let voxel = obs.intr.pixel_size_at(1.0);
        for (s, t) in corr.source.points().iter().zip(corr.target.points()) {
            assert!((s - t).norm() <= voxel, "pair off by {}", (s - t).norm());
        }
    }

    #[test]
    fn tiny_segment_yields_too_few_correspondences() {
        let state = state_with(vec![(0, small_box(), RigidTransform::planar(0.0, 0.0, 0.0))]);
        let pair = pair_of(state.clone(), state);
        let obs = render(&pair.current, &intr());
        let flow = ground_truth_flow(&pair, &obs, &obs).unwrap();
        let mapping: BTreeMap<i32, i32> = [(0, 0)].into_iter().collect();
        let cfg = MatchConfig {
            min_pixels: usize::MAX,
            ..MatchConfig::default()
        };
        assert!(matches!(
            correspondences(&obs, &obs, &flow, 0, &mapping, &cfg),
            Err(FlowError::TooFewCorrespondences { object_id: 0, .. })
        ));
    }

    #[test]
    fn unmatched_object_is_rejected() {
        let state = state_with(vec![(0, small_box(), RigidTransform::identity())]);
        let pair = pair_of(state.clone(), state);
        let obs = render(&pair.current, &intr());
        let flow = ground_truth_flow(&pair, &obs, &obs).unwrap();
        let empty = BTreeMap::new();
        assert_eq!(
            correspondences(&obs, &obs, &flow, 0, &empty, &MatchConfig::default()),
            Err(FlowError::UnmatchedObject { object_id: 0 })
        );
    }
}
