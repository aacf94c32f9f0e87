//! Controlled flow corruption standing in for learned-flow error: Gaussian
//! jitter on inliers, uniform in-image outliers, and dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::FlowField;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CorruptionModel {
    /// Std-dev of per-component Gaussian noise on inlier flow, pixels.
    pub sigma_px: f64,
    /// Probability that a pixel's displacement is replaced by a uniform
    /// random in-bounds landing.
    pub outlier_frac: f64,
    /// Probability that a valid pixel is dropped (marked invalid).
    pub dropout_frac: f64,
    pub seed: u64,
}

impl Default for CorruptionModel {
    fn default() -> Self {
        Self {
            sigma_px: 0.0,
            outlier_frac: 0.0,
            dropout_frac: 0.0,
            seed: 0,
        }
    }
}

impl CorruptionModel {
    pub fn is_identity(&self) -> bool {
        self.sigma_px == 0.0 && self.outlier_frac == 0.0 && self.dropout_frac == 0.0
    }

    /// Same noise parameters on a different stream.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Corrupt each valid pixel independently: with probability `outlier_frac`
/// replace the displacement by a uniform in-bounds one, otherwise jitter it
/// with N(0, sigma_px²) per component (landing clamped into the image), and
/// finally drop the pixel with probability `dropout_frac`. Deterministic in
/// the model seed; invalid pixels are untouched.
pub fn corrupt(flow: &FlowField, model: &CorruptionModel) -> FlowField {
    if model.is_identity() {
        return flow.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let normal = (model.sigma_px > 0.0)
        .then(|| Normal::new(0.0, model.sigma_px).expect("sigma_px must be non-negative"));
    let (w, h) = (flow.width(), flow.height());
    let (max_u, max_v) = ((w - 1) as f64, (h - 1) as f64);

    let mut out = flow.clone();
    for v in 0..h {
        for u in 0..w {
            if !flow.valid.get(u, v) {
                continue;
            }
            let (mut du, mut dv) = (flow.du.get(u, v), flow.dv.get(u, v));
            if model.outlier_frac > 0.0 && rng.random::<f64>() < model.outlier_frac {
                du = rng.random_range(0.0..=max_u) - u as f64;
                dv = rng.random_range(0.0..=max_v) - v as f64;
            } else if let Some(normal) = &normal {
                du += normal.sample(&mut rng);
                dv += normal.sample(&mut rng);
                // Keep the landing inside the image so validity still holds.
                du = (u as f64 + du).clamp(0.0, max_u) - u as f64;
                dv = (v as f64 + dv).clamp(0.0, max_v) - v as f64;
            }
            if model.dropout_frac > 0.0 && rng.random::<f64>() < model.dropout_frac {
                out.valid.set(u, v, false);
                out.du.set(u, v, 0.0);
                out.dv.set(u, v, 0.0);
            } else {
                out.du.set(u, v, du);
                out.dv.set(u, v, dv);
            }
        }
    }
    out
}
