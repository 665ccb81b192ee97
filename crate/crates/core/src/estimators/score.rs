use serde::{Deserialize, Serialize};

use super::{ito_weight, EstimatorResult, MonteCarlo};
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::paths::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Box,
    Gaussian,
}

/// Conditioning window around the target endpoint `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBinSpec {
    pub target: Vec<f64>,
    /// `None` picks the 1% quantile of endpoint distances.
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
}

impl ConditionalBinSpec {
    pub fn new(target: Vec<f64>, bandwidth: Option<f64>, kernel: Kernel) -> Result<Self> {
        if let Some(h) = bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(Self { target, bandwidth, kernel })
    }

    fn weight(&self, distance: f64, h: f64) -> f64 {
        match self.kernel {
            Kernel::Box => {
                if distance <= h {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * (distance / h).powi(2)).exp(),
        }
    }
}

/// Fraction of paths targeted by the automatic bandwidth.
const AUTO_BANDWIDTH_QUANTILE: f64 = 0.01;

impl MonteCarlo<'_> {
    /// `<∇ log p_t(·, y)(x0), v0>` as the kernel-weighted conditional mean of
    /// `(1/t) Σ_k <Y(x_k) v_k, ΔB_k>` given `x_t ≈ y`.
    ///
    /// Metadata: `bandwidth`, `effective_paths` (`(ΣK)² / ΣK²`),
    /// `bias_scale` (`bandwidth²`, the order of the smoothing bias).
    pub fn score_gradient(&self, bins: &ConditionalBinSpec, v0: &[f64]) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let model = self.model();
        if bins.target.len() != model.ambient_dim() {
            return Err(Error::DimensionMismatch {
                what: "score target",
                expected: model.ambient_dim(),
                got: bins.target.len(),
            });
        }
        let t = self.t();
        let samples = self.map_paths(|i| {
            let (noise, traj, v) = self.simulate_with_variation(i, v0, Clock::Forward)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let w = ito_weight(model, &traj, &noise, &v, 0..traj.len() - 1)? / t;
            let d = traj
                .terminal()
                .iter()
                .zip(&bins.target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(Some((d, w)))
        })?;
        let accepted: Vec<(f64, f64)> = samples.iter().flatten().copied().collect();
        if accepted.is_empty() {
            return Err(Error::AllPathsBlewUp(samples.len()));
        }
        let h = match bins.bandwidth {
            Some(h) => h,
            None => {
                let mut d: Vec<f64> = accepted.iter().map(|p| p.0).collect();
                d.sort_by(f64::total_cmp);
                let idx = ((AUTO_BANDWIDTH_QUANTILE * d.len() as f64).ceil() as usize).clamp(1, d.len()) - 1;
                d[idx].max(f64::MIN_POSITIVE)
            }
        };
        let k: Vec<f64> = accepted.iter().map(|&(d, _)| bins.weight(d, h)).collect();
        let sum_k = pairwise_sum(&k);
        if !(sum_k > 0.0) {
            return Err(Error::EmptyBin { bandwidth: h });
        }
        let kw: Vec<f64> = k.iter().zip(&accepted).map(|(k, p)| k * p.1).collect();
        let mean = pairwise_sum(&kw) / sum_k;
        let k2: Vec<f64> = k.iter().map(|k| k * k).collect();
        let dev: Vec<f64> = k.iter().zip(&accepted).map(|(k, p)| (k * (p.1 - mean)).powi(2)).collect();
        let sum_k2 = pairwise_sum(&k2);
        let n_rejected = samples.len() - accepted.len();
        let mut result = EstimatorResult {
            mean,
            std_error: pairwise_sum(&dev).sqrt() / sum_k,
            n_paths: samples.len(),
            n_rejected,
            seed: self.seed(),
            grid: self.grid(),
            valid: n_rejected as f64 <= super::MAX_REJECTED_FRACTION * samples.len() as f64,
            metadata: Default::default(),
        };
        result.metadata.insert("bandwidth".into(), h);
        result.metadata.insert("effective_paths".into(), sum_k * sum_k / sum_k2);
        result.metadata.insert("bias_scale".into(), h * h);
        Ok(result)
    }
}
