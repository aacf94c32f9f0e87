//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measurements (visible under `--nocapture`).
//!
//! Learned-perception baselines are not reproducible here, so accuracy
//! criteria are property-based (exact recovery, robustness, convergence,
//! determinism) plus directional trends against the physically impossible
//! teleport upper bound.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rearrange_core::flow::CorrespondenceSet;
use rearrange_core::geometry::{Frame, PointSet, RigidTransform};
use rearrange_core::pipeline::{
    compute_metrics, run_episode, run_experiment, ActionKind, EpisodeResult, ExperimentConfig,
    MetricsSummary, ObjectResult, TermReason,
};
use rearrange_core::planner::PlannerConfig;
use rearrange_core::registration::{
    kabsch, kabsch_planar, ransac_fit, FullSe3Solver, RansacConfig, RegistrationError,
};
use rearrange_core::scene::shape::{ObjectModel, Shape};
use rearrange_core::scene::{
    generate_scene_pair, tabletop_camera, GenerationConfig, PlacedObject, Rect, ScenePair,
    SceneState,
};

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

fn random_planar_transform(rng: &mut impl Rng) -> RigidTransform {
    // Yaw anywhere in (−180°, 180°], translation norm ≤ 0.5 m.
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    loop {
        let x: f64 = rng.random_range(-0.5..0.5);
        let y = rng.random_range(-0.5..0.5);
        if x.hypot(y) <= 0.5 {
            return RigidTransform::planar(x, y, yaw);
        }
    }
}

/// One-sided sign test: P(X ≥ wins) for X ~ Binomial(n, 1/2).
fn sign_test_p(wins: usize, n: usize) -> f64 {
    let ln_fact = |m: usize| -> f64 { (1..=m).map(|i| (i as f64).ln()).sum() };
    let ln2 = std::f64::consts::LN_2;
    (wins..=n)
        .map(|k| (ln_fact(n) - ln_fact(k) - ln_fact(n - k) - n as f64 * ln2).exp())
        .sum()
}

#[test]
fn criterion_1_exact_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let normal = Vector3::z_axis();
    let trials = 1000;
    let mut elapsed = std::time::Duration::ZERO;
    for _ in 0..trials {
        let source = random_cloud(&mut rng, 100, 0.2);
        let truth = random_planar_transform(&mut rng);
        let target: Vec<_> = source.iter().map(|p| truth.apply_point(p)).collect();

        let t0 = Instant::now();
        let full = kabsch(&source, &target).unwrap();
        let planar = kabsch_planar(&source, &target, &normal).unwrap();
        elapsed += t0.elapsed();

        for fit in [&full, &planar] {
            assert!(
                fit.rotation_distance_to(&truth) < 1e-9,
                "rotation error {} rad",
                fit.rotation_distance_to(&truth)
            );
            assert!(
                (fit.translation - truth.translation).norm() < 1e-9,
                "translation error {} m",
                (fit.translation - truth.translation).norm()
            );
        }
    }
    let per_fit = elapsed / (2 * trials);
    assert!(
        per_fit.as_secs_f64() < 1e-3,
        "fit took {per_fit:?}, budget 1 ms"
    );
    println!(
        "criterion 1 (exact recovery): PASS — {trials} transforms recovered by both solvers \
         within 1e-9, {per_fit:?}/fit"
    );
}

#[test]
fn criterion_2_ransac_robustness() {
    let trials = 200;
    let cfg = RansacConfig::default();
    assert_eq!(cfg.iterations, 512);

    // 40% uniform outliers in a 0.5 m cube + σ = 2 mm inlier noise.
    let mut good = 0;
    let mut elapsed = std::time::Duration::ZERO;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC2_00 + trial);
        let source = random_cloud(&mut rng, 500, 0.15);
        let truth = random_planar_transform(&mut rng);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let target: Vec<_> = source
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i % 5 < 2 {
                    Vector3::new(
                        rng.random_range(-0.25..0.25),
                        rng.random_range(-0.25..0.25),
                        rng.random_range(-0.25..0.25),
                    )
                } else {
                    truth.apply_point(p)
                        + Vector3::new(
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                        )
                }
            })
            .collect();
        let set = CorrespondenceSet {
            object_id: 0,
            source: PointSet::new(Frame::Camera, source),
            target: PointSet::new(Frame::Camera, target),
        };
        let t0 = Instant::now();
        let fit = ransac_fit(&set, &cfg.with_seed(trial), &FullSe3Solver);
        elapsed += t0.elapsed();
        if let Ok(fit) = fit {
            let rot_ok = fit.transform.rotation_distance_to(&truth).to_degrees() < 2.0;
            let trans_ok = (fit.transform.translation - truth.translation).norm() < 0.01;
            if rot_ok && trans_ok {
                good += 1;
            }
        }
    }
    let per_fit = elapsed / trials as u32;
    assert!(
        good as f64 >= 0.95 * trials as f64,
        "only {good}/{trials} accurate recoveries"
    );
    assert!(
        per_fit.as_secs_f64() < 0.05,
        "fit took {per_fit:?}, budget 50 ms"
    );

    // 100% outliers must fail to reach consensus.
    let mut no_consensus = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC2_F0 + trial);
        let source = random_cloud(&mut rng, 500, 0.15);
        let target = random_cloud(&mut rng, 500, 0.25);
        let set = CorrespondenceSet {
            object_id: 0,
            source: PointSet::new(Frame::Camera, source),
            target: PointSet::new(Frame::Camera, target),
        };
        if matches!(
            ransac_fit(&set, &cfg.with_seed(trial), &FullSe3Solver),
            Err(RegistrationError::NoConsensus { .. })
        ) {
            no_consensus += 1;
        }
    }
    assert!(
        no_consensus as f64 >= 0.99 * trials as f64,
        "only {no_consensus}/{trials} rejections at 100% outliers"
    );
    println!(
        "criterion 2 (RANSAC robustness): PASS — {good}/{trials} within 2°/1 cm at 40% outliers, \
         {no_consensus}/{trials} NoConsensus at 100% outliers, {per_fit:?}/fit"
    );
}

/// Planar-vs-SO(3) trend. The accuracy the planar constraint improves is
/// the estimated rotation: every executed placement rests on the table, so
/// final-state rotation errors are yaw-only in both modes and cannot carry
/// the constraint's effect. The comparison therefore pairs, per episode,
/// the median rotation error of every transform the pipeline estimated
/// against the per-round ground truth.
#[test]
fn criterion_3_planar_vs_se3_trend() {
    let t0 = Instant::now();
    let scenes = 100;
    let mut cfg = ExperimentConfig {
        scenes,
        ..ExperimentConfig::default()
    };
    cfg.corruption.sigma_px = 2.0;
    cfg.corruption.outlier_frac = 0.3;

    cfg.rotation = "planar".into();
    let planar = run_experiment(&cfg).unwrap();
    cfg.rotation = "full_se3".into();
    let se3 = run_experiment(&cfg).unwrap();

    let episode_est_median = |ep: &EpisodeResult| -> Option<f64> {
        if ep.estimate_errors.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = ep.estimate_errors.iter().map(|e| e.rot_err_deg).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(v[(v.len() - 1) / 2])
    };
    let mut wins = 0;
    let mut losses = 0;
    let mut planar_all: Vec<f64> = Vec::new();
    let mut se3_all: Vec<f64> = Vec::new();
    for (a, b) in planar.episodes.iter().zip(&se3.episodes) {
        planar_all.extend(a.estimate_errors.iter().map(|e| e.rot_err_deg));
        se3_all.extend(b.estimate_errors.iter().map(|e| e.rot_err_deg));
        let (Some(pa), Some(pb)) = (episode_est_median(a), episode_est_median(b)) else {
            continue;
        };
        if pa < pb {
            wins += 1;
        } else if pa > pb {
            losses += 1;
        }
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[(v.len() - 1) / 2]
    };
    let (planar_median, se3_median) = (median(&mut planar_all), median(&mut se3_all));
    let p = sign_test_p(wins, wins + losses);
    let elapsed = t0.elapsed();
    assert!(
        planar_median < se3_median,
        "planar median {planar_median}° not below SE(3) median {se3_median}°"
    );
    assert!(p < 0.05, "sign test p = {p} over {wins}+{losses} pairs");
    assert!(
        elapsed.as_secs() < 600,
        "trend comparison took {elapsed:?}, budget 10 min"
    );
    println!(
        "criterion 3 (planar-vs-SO(3) trend): PASS — estimated rotation error planar \
         {planar_median:.3}° < se3 {se3_median:.3}°, episode wins {wins}/{}, p = {p:.2e}; \
         final-state medians {:.3}°/{:.3}°; {elapsed:?} total",
        wins + losses,
        planar.summary.median_rot_deg,
        se3.summary.median_rot_deg
    );
}

/// Two-object scene whose goals are exactly swapped: neither goal placement
/// is initially free, so the planner must relocate one object first.
fn swap_deadlock_pair(seed: u64) -> ScenePair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = rng.random_range(0.07..0.09);
    let half_gap = rng.random_range(0.05..0.07);
    let shape = Shape::Box {
        width: side,
        depth: side,
        height: 0.05,
    };
    let samples = 2.0e4;
    let models: Vec<Arc<ObjectModel>> = (0..2)
        .map(|id| Arc::new(ObjectModel::new(id, shape, samples)))
        .collect();
    let pose_a = RigidTransform::planar(-half_gap, 0.0, 0.0);
    let pose_b = RigidTransform::planar(half_gap, 0.0, 0.0);
    let camera_pose = tabletop_camera(nalgebra::Vector2::zeros(), std::f64::consts::FRAC_PI_4, 1.0);
    let make = |poses: [RigidTransform; 2]| SceneState {
        objects: models
            .iter()
            .zip(poses)
            .map(|(model, pose)| PlacedObject {
                model: Arc::clone(model),
                pose,
            })
            .collect(),
        table_bounds: Rect::centered(0.35, 0.35),
        camera_pose,
        samples_per_m2: samples,
    };
    let current = make([pose_a, pose_b]);
    let goal = make([pose_b, pose_a]);
    let gt_transforms: BTreeMap<i32, RigidTransform> = [
        (0, pose_b.compose(&pose_a.invert())),
        (1, pose_a.compose(&pose_b.invert())),
    ]
    .into_iter()
    .collect();
    ScenePair {
        current,
        goal,
        gt_transforms,
    }
}

#[test]
fn criterion_4_oracle_convergence_bound() {
    let cfg = ExperimentConfig {
        mode: "oracle_transforms".into(),
        ..ExperimentConfig::default()
    };
    let gen = GenerationConfig {
        samples_per_m2: 2.0e4,
        ..GenerationConfig::default()
    };
    let thresholds = PlannerConfig::default();

    // 90 random scenes. Exact convergence requires every object to start
    // above the termination thresholds (otherwise the episode correctly
    // stops without touching it — criterion 6 covers that path).
    let mut pairs = Vec::new();
    let mut seed = 0u64;
    while pairs.len() < 90 {
        let pair = generate_scene_pair(&gen, seed).unwrap();
        seed += 1;
        let all_actionable = pair.gt_transforms.values().all(|t| {
            t.rotation_angle() >= thresholds.rot_threshold
                || t.translation.norm() >= thresholds.trans_threshold
        });
        if all_actionable {
            pairs.push(pair);
        }
    }
    // Plus 10 constructed swap deadlocks that need the freespace fallback.
    for s in 0..10 {
        pairs.push(swap_deadlock_pair(0xC4_00 + s));
    }

    let mut fallbacks = 0;
    for (scene_id, pair) in pairs.iter().enumerate() {
        let n = pair.current.objects.len();
        let ep = run_episode(pair, &cfg, scene_id as u64).unwrap();
        assert_eq!(
            ep.terminated,
            TermReason::Done,
            "scene {scene_id} ended {}",
            ep.terminated
        );
        assert!(
            ep.steps_taken < 2 * n,
            "scene {scene_id}: {} steps for {n} objects",
            ep.steps_taken
        );
        for o in &ep.objects {
            assert!(
                o.rot_err_deg.to_radians() < 1e-6 && o.trans_err_cm / 100.0 < 1e-6,
                "scene {scene_id} object {}: {}° / {} cm",
                o.object_id,
                o.rot_err_deg,
                o.trans_err_cm
            );
        }
        if scene_id >= 90 {
            assert!(
                ep.actions
                    .iter()
                    .any(|a| matches!(a.kind, ActionKind::FreespaceMove)),
                "swap scene {scene_id} solved without the freespace fallback"
            );
            fallbacks += 1;
        }
    }
    println!(
        "criterion 4 (oracle convergence): PASS — 100/100 done within 2n−1 actions at <1e-6 \
         error, {fallbacks}/10 swap scenes used the freespace fallback"
    );
}

#[test]
fn criterion_5_teleport_parity() {
    let scenes = 100;
    let mut cfg = ExperimentConfig {
        scenes,
        ..ExperimentConfig::default()
    };
    cfg.mode = "full_pipeline".into();
    let planner = run_experiment(&cfg).unwrap();
    cfg.mode = "teleport_baseline".into();
    let teleport = run_experiment(&cfg).unwrap();

    let (p, t) = (&planner.summary, &teleport.summary);
    assert!(
        p.median_rot_deg <= 1.5 * t.median_rot_deg + 1e-12,
        "planner rot median {} vs teleport {}",
        p.median_rot_deg,
        t.median_rot_deg
    );
    assert!(
        p.median_trans_cm <= 1.5 * t.median_trans_cm + 1e-12,
        "planner trans median {} vs teleport {}",
        p.median_trans_cm,
        t.median_trans_cm
    );
    assert!(p.pct_medium >= 95.0, "planner medium tier {}%", p.pct_medium);
    assert!(t.pct_medium >= 95.0, "teleport medium tier {}%", t.pct_medium);
    println!(
        "criterion 5 (teleport parity): PASS — planner {:.4}°/{:.4} cm vs teleport \
         {:.4}°/{:.4} cm, medium tiers {:.1}%/{:.1}%",
        p.median_rot_deg, p.median_trans_cm, t.median_rot_deg, t.median_trans_cm,
        p.pct_medium, t.pct_medium
    );
}

/// Pair in which every object's remaining transform is below the 10°/5 cm
/// termination thresholds by construction.
fn below_threshold_pair(seed: u64) -> ScenePair {
    let gen = GenerationConfig {
        min_objects: 2,
        max_objects: 4,
        samples_per_m2: 2.0e4,
        ..GenerationConfig::default()
    };
    let base = generate_scene_pair(&gen, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC6);
    let goal = base.goal.clone();
    let mut current = goal.clone();
    let mut gt_transforms = BTreeMap::new();
    for idx in 0..goal.objects.len() {
        let goal_pose = goal.objects[idx].pose;
        let mut accepted = RigidTransform::identity();
        for _ in 0..200 {
            let yaw = rng.random_range(-9.9f64.to_radians()..9.9f64.to_radians());
            let (dx, dy) = loop {
                let dx: f64 = rng.random_range(-0.049..0.049);
                let dy = rng.random_range(-0.049..0.049);
                if dx.hypot(dy) < 0.049 {
                    break (dx, dy);
                }
            };
            let delta = RigidTransform::planar(dx, dy, yaw);
            let candidate = delta.invert().compose(&goal_pose);
            let fp = current.objects[idx].model.footprint.transformed(&candidate);
            let clear = fp.within_rect(&current.table_bounds)
                && current.objects[..idx]
                    .iter()
                    .all(|o| fp.distance_to(&o.world_footprint()) >= gen.clearance);
            if clear {
                accepted = delta;
                break;
            }
        }
        current.objects[idx].pose = accepted.invert().compose(&goal_pose);
        gt_transforms.insert(goal.objects[idx].model.id, accepted);
    }
    ScenePair {
        current,
        goal,
        gt_transforms,
    }
}

#[test]
fn criterion_6_termination_thresholds() {
    let cfg = ExperimentConfig {
        mode: "oracle_transforms".into(),
        ..ExperimentConfig::default()
    };
    let thresholds = PlannerConfig::default();
    for seed in 0..100u64 {
        let pair = below_threshold_pair(seed);
        for t in pair.gt_transforms.values() {
            assert!(
                t.rotation_angle() < thresholds.rot_threshold
                    && t.translation.norm() < thresholds.trans_threshold,
                "construction violated the threshold bound"
            );
        }
        let ep = run_episode(&pair, &cfg, seed).unwrap();
        assert_eq!(ep.terminated, TermReason::Done, "seed {seed}");
        assert_eq!(ep.steps_taken, 0, "seed {seed} took {} actions", ep.steps_taken);
    }
    println!(
        "criterion 6 (termination thresholds): PASS — 100/100 below-threshold scenes \
         terminated done with 0 actions"
    );
}

#[test]
fn criterion_7_clean_pipeline_accuracy() {
    let mut cfg = ExperimentConfig {
        scenes: 100,
        ..ExperimentConfig::default()
    };
    cfg.generation.min_objects = 3;
    cfg.generation.max_objects = 5;
    let out = run_experiment(&cfg).unwrap();
    assert!(
        out.summary.pct_easy >= 90.0,
        "easy tier {}%",
        out.summary.pct_easy
    );
    println!(
        "criterion 7 (clean end-to-end): PASS — easy tier {:.1}% over {} objects \
         (median {:.3}° / {:.3} cm)",
        out.summary.pct_easy, out.summary.objects, out.summary.median_rot_deg,
        out.summary.median_trans_cm
    );
}

/// Independent aggregator: selection-based lower median and explicit loop
/// counting, no sorting shared with the implementation under test.
fn brute_force_summary(results: &[EpisodeResult]) -> MetricsSummary {
    fn selection_lower_median(vals: &[f64]) -> f64 {
        let k = (vals.len() - 1) / 2;
        for &x in vals {
            let less = vals.iter().filter(|&&v| v < x).count();
            let le = vals.iter().filter(|&&v| v <= x).count();
            if less <= k && k < le {
                return x;
            }
        }
        unreachable!("median must exist for nonempty input")
    }
    let mut rot = Vec::new();
    let mut trans = Vec::new();
    let mut n_easy = 0usize;
    let mut n_medium = 0usize;
    let mut n_hard = 0usize;
    for ep in results {
        for o in &ep.objects {
            rot.push(o.rot_err_deg);
            trans.push(o.trans_err_cm);
            if o.trans_err_cm < 2.0 && o.rot_err_deg < 5.0 {
                n_easy += 1;
            }
            if o.trans_err_cm < 5.0 && o.rot_err_deg < 10.0 {
                n_medium += 1;
            }
            if o.trans_err_cm < 10.0 && o.rot_err_deg < 15.0 {
                n_hard += 1;
            }
        }
    }
    let total = rot.len();
    MetricsSummary {
        episodes: results.len(),
        objects: total,
        median_rot_deg: selection_lower_median(&rot),
        median_trans_cm: selection_lower_median(&trans),
        pct_easy: 100.0 * n_easy as f64 / total as f64,
        pct_medium: 100.0 * n_medium as f64 / total as f64,
        pct_hard: 100.0 * n_hard as f64 / total as f64,
    }
}

#[test]
fn criterion_8_metrics_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    for case in 0..1000 {
        let n_eps = rng.random_range(1..=5);
        let results: Vec<EpisodeResult> = (0..n_eps)
            .map(|scene_id| {
                let n_obj = rng.random_range(1..=7);
                let objects = (0..n_obj)
                    .map(|object_id| {
                        // Mix scales and exact duplicates across the tier
                        // boundaries.
                        let rot = match rng.random_range(0..4) {
                            0 => rng.random_range(0.0..2.0),
                            1 => rng.random_range(0.0..20.0),
                            2 => 5.0,
                            _ => rng.random_range(0.0..180.0),
                        };
                        let trans = match rng.random_range(0..4) {
                            0 => rng.random_range(0.0..1.0),
                            1 => rng.random_range(0.0..8.0),
                            2 => 2.0,
                            _ => rng.random_range(0.0..40.0),
                        };
                        ObjectResult {
                            object_id,
                            rot_err_deg: rot,
                            trans_err_cm: trans,
                            degraded: false,
                        }
                    })
                    .collect();
                EpisodeResult {
                    scene_id,
                    steps_taken: 0,
                    terminated: TermReason::Done,
                    objects,
                    actions: Vec::new(),
                    estimate_errors: Vec::new(),
                }
            })
            .collect();
        let ours = compute_metrics(&results).unwrap();
        let oracle = brute_force_summary(&results);
        assert_eq!(ours, oracle, "case {case} diverged");
    }
    println!(
        "criterion 8 (metrics oracle equivalence): PASS — 1000 random inputs agreed exactly"
    );
}

// Criterion 9 (byte-identical CLI outputs across runs and thread counts)
// lives in the CLI crate's acceptance tests, where the binary is available.

#[test]
fn planar_solver_registry_smoke() {
    // The solver used by criterion 3 must be reachable by its registry name.
    use rearrange_core::registry::{build_solver, SolverContext};
    let ctx = SolverContext {
        table_normal_in_camera: Unit::new_normalize(Vector3::new(0.0, -0.7, 0.7)),
    };
    for name in ["planar", "full_se3"] {
        assert!(build_solver(name, &ctx).is_ok());
    }
}
