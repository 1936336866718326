//! Depth-patch distance estimator: synthetic pixels, sigma clipping, mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_CLIP_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthEstimatorModel {
    /// Pixels inside the inner bounding box.
    pub patch_size: usize,
    pub noise_sigma: f64,
    /// Fraction of pixels that see background instead of the leader.
    pub outlier_rate: f64,
    /// Background pixels read `L + offset` with the offset uniform in this range.
    pub outlier_offset_range: [f64; 2],
    pub sigma_clip_k: f64,
}

impl DepthEstimatorModel {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.outlier_offset_range;
        let ok = self.patch_size >= 4
            && self.noise_sigma >= 0.0
            && self.noise_sigma.is_finite()
            && (0.0..1.0).contains(&self.outlier_rate)
            && lo.is_finite()
            && hi.is_finite()
            && lo <= hi
            && self.sigma_clip_k > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid depth estimator {self:?}")))
        }
    }
}

impl Default for DepthEstimatorModel {
    fn default() -> Self {
        Self {
            patch_size: 64,
            noise_sigma: 0.02,
            outlier_rate: 0.1,
            outlier_offset_range: [1.0, 5.0],
            sigma_clip_k: 2.0,
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Iterative two-sided sigma clipping about the median with the population
/// standard deviation as scale. Returns the surviving samples.
pub fn sigma_clip(samples: &[f64], k: f64) -> Vec<f64> {
    let mut kept: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    kept.sort_by(f64::total_cmp);
    for _ in 0..MAX_CLIP_ITERATIONS {
        if kept.is_empty() {
            break;
        }
        let center = median(&kept);
        let mu = mean(&kept);
        let std = (kept.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / kept.len() as f64).sqrt();
        let before = kept.len();
        kept.retain(|x| (x - center).abs() <= k * std);
        if kept.len() == before {
            break;
        }
    }
    kept
}

/// Mean of the sigma-clipped samples.
pub fn clipped_mean(samples: &[f64], k: f64) -> Result<f64> {
    let kept = sigma_clip(samples, k);
    if kept.is_empty() {
        return Err(Error::AllClipped);
    }
    Ok(mean(&kept))
}

#[derive(Debug, Clone)]
pub struct DepthEstimator {
    model: DepthEstimatorModel,
    rng: ChaCha8Rng,
    patch: Vec<f64>,
}

impl DepthEstimator {
    pub fn new(model: DepthEstimatorModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            patch: Vec::with_capacity(model.patch_size),
        })
    }

    pub fn model(&self) -> &DepthEstimatorModel {
        &self.model
    }

    /// Synthesizes the inner-box depth pixels for a leader at `l_true`.
    pub fn synthesize_patch(&mut self, l_true: f64) -> &[f64] {
        let m = self.model;
        let noise = Normal::new(0.0, m.noise_sigma).expect("validated sigma");
        let [lo, hi] = m.outlier_offset_range;
        self.patch.clear();
        for _ in 0..m.patch_size {
            let background = self.rng.gen::<f64>() < m.outlier_rate;
            let offset = if hi > lo { self.rng.gen_range(lo..hi) } else { lo };
            let pixel = if background {
                l_true + offset
            } else {
                l_true + noise.sample(&mut self.rng)
            };
            self.patch.push(pixel);
        }
        &self.patch
    }

    pub fn measure(&mut self, l_true: f64) -> Result<f64> {
        let k = self.model.sigma_clip_k;
        let patch = self.synthesize_patch(l_true);
        clipped_mean(patch, k)
    }
}

pub fn measure_depth(l_true: f64, estimator: &mut DepthEstimator) -> Result<f64> {
    estimator.measure(l_true)
}
