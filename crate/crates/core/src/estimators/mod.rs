//! Monte Carlo estimators of `P_t f` and its derivatives.
//!
//! Every estimator runs the same per-path pipeline (noise, trajectory,
//! variation flows, path functional) and reduces the per-path values with a
//! fixed pairwise tree in path order, so results do not depend on the number
//! of worker threads.

mod gradient;
mod hessian;
mod lie;
mod potential;
mod score;

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, pairwise_sum};
use crate::models::{validate_point, validate_tangent, DiffusionModel};
use crate::paths::{generate_noise, integrate_ito_with, Clock, NoisePath, PathOptions, TimeGrid, Trajectory, BLOW_UP_RADIUS};
use crate::variation::{integrate_with_variation, VariationPath};

pub use hessian::{HessianVariant, DEFAULT_INNER_PATHS};
pub use score::{ConditionalBinSpec, Kernel};

/// Fraction of rejected paths above which a result is flagged invalid.
pub const MAX_REJECTED_FRACTION: f64 = 0.01;

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_rejected: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    /// False when more than 1% of the paths were rejected.
    pub valid: bool,
    /// Estimator-specific extras (bandwidth, effective sample size, ...).
    pub metadata: BTreeMap<String, f64>,
}

impl EstimatorResult {
    pub fn n_accepted(&self) -> usize {
        self.n_paths - self.n_rejected
    }

    /// Sample variance of the per-path functional.
    pub fn sample_variance(&self) -> f64 {
        self.std_error * self.std_error * self.n_accepted() as f64
    }

    pub fn rejected_fraction(&self) -> f64 {
        self.n_rejected as f64 / self.n_paths as f64
    }

    /// `|self - other| <= k * sqrt(se1² + se2²)`
    pub fn agrees_with(&self, other: &EstimatorResult, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.std_error.hypot(other.std_error)
    }
}

/// Reduces per-path samples (`None` = rejected) to an [`EstimatorResult`].
pub fn summarize(samples: &[Option<f64>], seed: u64, grid: TimeGrid) -> Result<EstimatorResult> {
    let accepted: Vec<f64> = samples.iter().flatten().copied().collect();
    let n_paths = samples.len();
    let n_rejected = n_paths - accepted.len();
    if accepted.is_empty() {
        return Err(Error::AllPathsBlewUp(n_paths));
    }
    let n = accepted.len() as f64;
    let mean = pairwise_sum(&accepted) / n;
    let var = if accepted.len() > 1 {
        let sq: Vec<f64> = accepted.iter().map(|x| (x - mean) * (x - mean)).collect();
        pairwise_sum(&sq) / (n - 1.0)
    } else {
        0.0
    };
    Ok(EstimatorResult {
        mean,
        std_error: (var / n).sqrt(),
        n_paths,
        n_rejected,
        seed,
        grid,
        valid: n_rejected as f64 <= MAX_REJECTED_FRACTION * n_paths as f64,
        metadata: BTreeMap::new(),
    })
}

/// A Monte Carlo experiment: model, start point, grid, path budget and seed.
#[derive(Clone)]
pub struct MonteCarlo<'a> {
    model: &'a dyn DiffusionModel,
    x0: Vec<f64>,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    blow_up_radius: f64,
}

impl std::fmt::Debug for MonteCarlo<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonteCarlo")
            .field("kind", &self.model.kind())
            .field("x0", &self.x0)
            .field("grid", &self.grid)
            .field("n_paths", &self.n_paths)
            .field("seed", &self.seed)
            .finish()
    }
}

impl<'a> MonteCarlo<'a> {
    pub fn new(model: &'a dyn DiffusionModel, x0: &[f64], grid: TimeGrid, n_paths: usize, seed: u64) -> Result<Self> {
        validate_point(model, x0)?;
        if n_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        Ok(Self {
            model,
            x0: x0.to_vec(),
            grid,
            n_paths,
            seed,
            blow_up_radius: BLOW_UP_RADIUS,
        })
    }

    pub fn with_blow_up_radius(mut self, radius: f64) -> Self {
        self.blow_up_radius = radius;
        self
    }

    /// Same experiment started from another point.
    pub fn at(&self, x0: &[f64]) -> Result<Self> {
        validate_point(self.model, x0)?;
        Ok(Self {
            x0: x0.to_vec(),
            ..self.clone()
        })
    }

    /// Same experiment with a different path budget.
    pub fn with_paths(&self, n_paths: usize) -> Result<Self> {
        Self::new(self.model, &self.x0, self.grid, n_paths, self.seed).map(|m| m.with_blow_up_radius(self.blow_up_radius))
    }

    pub fn model(&self) -> &'a dyn DiffusionModel {
        self.model
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t(&self) -> f64 {
        self.grid.t_end()
    }

    pub(crate) fn options(&self, clock: Clock) -> PathOptions {
        PathOptions {
            blow_up_radius: self.blow_up_radius,
            clock,
        }
    }

    pub(crate) fn noise(&self, path_index: u64) -> NoisePath {
        generate_noise(&self.grid, self.seed, path_index, self.model.noise_dim())
    }

    /// Noise and trajectory of path `i` from `x0`.
    pub fn simulate(&self, path_index: u64) -> Result<(NoisePath, Trajectory)> {
        self.simulate_from(&self.x0, path_index, Clock::Forward)
    }

    pub(crate) fn simulate_from(&self, x0: &[f64], path_index: u64, clock: Clock) -> Result<(NoisePath, Trajectory)> {
        let noise = self.noise(path_index);
        let traj = integrate_ito_with(self.model, x0, &self.grid, &noise, &self.options(clock))?;
        Ok((noise, traj))
    }

    /// Noise, trajectory and first variation of path `i` in one pass.
    pub fn simulate_with_variation(&self, path_index: u64, v0: &[f64], clock: Clock) -> Result<(NoisePath, Trajectory, VariationPath)> {
        let noise = self.noise(path_index);
        let (traj, v) = integrate_with_variation(self.model, &self.x0, v0, &self.grid, &noise, &self.options(clock))?;
        Ok((noise, traj, v))
    }

    pub(crate) fn check_tangent(&self, v: &[f64]) -> Result<()> {
        validate_tangent(self.model, &self.x0, v)
    }

    /// Evaluates `f` on every path index in parallel; output is in path order.
    pub fn map_paths<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        (0..self.n_paths as u64).into_par_iter().map(f).collect()
    }

    /// Runs a scalar path functional and summarizes it.
    pub fn estimate<F>(&self, f: F) -> Result<EstimatorResult>
    where
        F: Fn(u64) -> Result<Option<f64>> + Sync + Send,
    {
        let samples = self.map_paths(f)?;
        summarize(&samples, self.seed, self.grid)
    }
}

/// `Σ_{k ∈ range} <Y(x_k) v_k, ΔB_k>` with left-endpoint evaluation.
pub(crate) fn ito_weight(
    model: &dyn DiffusionModel,
    traj: &Trajectory,
    noise: &NoisePath,
    v: &VariationPath,
    range: Range<usize>,
) -> Result<f64> {
    let mut buf = vec![0.0; model.noise_dim()];
    let mut s = 0.0;
    for k in range {
        model.apply_right_inverse(traj.time(k), traj.state(k), v.vector(k), &mut buf)?;
        s += dot(&buf, noise.increment(k));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_constant_samples() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let r = summarize(&[Some(2.0), Some(2.0), None, Some(2.0)], 5, g).unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.n_rejected, 1);
        assert!(!r.valid);
        assert_eq!(summarize(&[None, None], 5, g), Err(Error::AllPathsBlewUp(2)));
    }

    #[test]
    fn summary_standard_error() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let r = summarize(&[Some(1.0), Some(3.0)], 0, g).unwrap();
        assert_eq!(r.mean, 2.0);
        assert!((r.std_error - 1.0).abs() < 1e-15);
        assert!((r.sample_variance() - 2.0).abs() < 1e-14);
    }
}
