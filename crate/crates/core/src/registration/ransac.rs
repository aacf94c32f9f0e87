//! RANSAC around a transform solver: minimal samples, inlier scoring,
//! deterministic tie-breaking, and an optional refit on the winning set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FitResult, RegistrationError, TransformSolver};
use crate::flow::CorrespondenceSet;
use crate::geometry::RigidTransform;

/// Minimal source-point triangles flatter than this (m²) are re-drawn.
const MIN_SAMPLE_TRIANGLE_AREA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Max residual (meters) for a correspondence to support a hypothesis.
    pub inlier_threshold: f64,
    /// Below this consensus size the fit is rejected outright.
    pub min_inliers: usize,
    pub sample_size: usize,
    /// Refit on the winning inlier set after the search.
    pub refine: bool,
    pub seed: u64,
    /// Larger sets are uniformly subsampled to this size before the search.
    pub max_correspondences: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 512,
            inlier_threshold: 0.01,
            min_inliers: 10,
            sample_size: 3,
            refine: true,
            seed: 0,
            max_correspondences: 5000,
        }
    }
}

impl RansacConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

fn residual(t: &RigidTransform, s: &nalgebra::Vector3<f64>, g: &nalgebra::Vector3<f64>) -> f64 {
    (t.apply_point(s) - g).norm()
}

/// Robust fit of the correspondence set. Draws `iterations` valid minimal
/// samples (degenerate triangles are re-drawn without consuming the budget,
/// up to 10× total draws), scores inliers by 3D residual, keeps the
/// hypothesis with the most inliers (ties: lower inlier RMS, then earlier
/// iteration), optionally refits on its inliers, and reports the inlier mask
/// and RMS over the full set. Deterministic in `cfg.seed`.
pub fn ransac_fit(
    c: &CorrespondenceSet,
    cfg: &RansacConfig,
    solver: &dyn TransformSolver,
) -> Result<FitResult, RegistrationError> {
    let n = c.len();
    let required = cfg.sample_size.max(cfg.min_inliers);
    if n < required {
        return Err(RegistrationError::TooFewCorrespondences { found: n, required });
    }
    let source = c.source.points();
    let target = c.target.points();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Bound per-object cost on dense segments.
    let working: Vec<usize> = if n > cfg.max_correspondences {
        let mut idx = rand::seq::index::sample(&mut rng, n, cfg.max_correspondences).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let m = working.len();

    struct Best {
        inliers: usize,
        rms: f64,
        transform: RigidTransform,
    }
    let mut best: Option<Best> = None;

    let mut accepted = 0usize;
    let mut draws = 0usize;
    let max_draws = cfg.iterations.saturating_mul(10);
    while accepted < cfg.iterations && draws < max_draws {
        draws += 1;
        let pick = rand::seq::index::sample(&mut rng, m, cfg.sample_size);
        let sample: Vec<usize> = pick.iter().map(|i| working[i]).collect();

        // Skip flat/collinear source triangles: their fits are unstable.
        if cfg.sample_size == 3 {
            let (a, b, c3) = (&source[sample[0]], &source[sample[1]], &source[sample[2]]);
            let area = 0.5 * (b - a).cross(&(c3 - a)).norm();
            if area < MIN_SAMPLE_TRIANGLE_AREA {
                continue;
            }
        }
        let src: Vec<_> = sample.iter().map(|&i| source[i]).collect();
        let tgt: Vec<_> = sample.iter().map(|&i| target[i]).collect();
        let Ok(hypothesis) = solver.solve(&src, &tgt) else {
            continue;
        };
        accepted += 1;

        let mut inliers = 0usize;
        let mut sq_sum = 0.0;
        for &i in &working {
            let r = residual(&hypothesis, &source[i], &target[i]);
            if r <= cfg.inlier_threshold {
                inliers += 1;
                sq_sum += r * r;
            }
        }
        if inliers == 0 {
            continue;
        }
        let rms = (sq_sum / inliers as f64).sqrt();
        let improves = match &best {
            None => true,
            Some(b) => inliers > b.inliers || (inliers == b.inliers && rms < b.rms),
        };
        if improves {
            best = Some(Best {
                inliers,
                rms,
                transform: hypothesis,
            });
        }
    }

    let best_inliers = best.as_ref().map_or(0, |b| b.inliers);
    let best = best
        .filter(|b| b.inliers >= cfg.min_inliers)
        .ok_or(RegistrationError::NoConsensus {
            best_inliers,
            min_inliers: cfg.min_inliers,
        })?;

    let mut transform = best.transform;
    if cfg.refine {
        let (src, tgt): (Vec<_>, Vec<_>) = working
            .iter()
            .filter(|&&i| residual(&transform, &source[i], &target[i]) <= cfg.inlier_threshold)
            .map(|&i| (source[i], target[i]))
            .unzip();
        if let Ok(refined) = solver.solve(&src, &tgt) {
            transform = refined;
        }
    }

    // Final mask and RMS over the complete correspondence set.
    let mut inlier_mask = vec![false; n];
    let mut sq_sum = 0.0;
    let mut inliers = 0usize;
    for i in 0..n {
        let r = residual(&transform, &source[i], &target[i]);
        if r <= cfg.inlier_threshold {
            inlier_mask[i] = true;
            inliers += 1;
            sq_sum += r * r;
        }
    }
    if inliers < cfg.min_inliers {
        return Err(RegistrationError::NoConsensus {
            best_inliers: inliers,
            min_inliers: cfg.min_inliers,
        });
    }
    Ok(FitResult {
        transform,
        inlier_mask,
        rms_residual: (sq_sum / inliers as f64).sqrt(),
        mode: solver.mode(),
    })
}
