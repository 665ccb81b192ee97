use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ito_weight, EstimatorResult, MonteCarlo};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::models::observable::Observable;
use crate::paths::{generate_noise_substream, path_rng, Clock, TimeGrid};
use crate::variation::{evolve_first_variation, evolve_second_variation, integrate_with_variation};

/// Inner paths per outer path for [`HessianVariant::Nested`].
pub const DEFAULT_INNER_PATHS: usize = 8;

/// Sub-stream used for the random time index of the nested variant.
const TIME_INDEX_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianVariant {
    /// All terms as stochastic weights; needs `DY` and the second variation.
    #[default]
    Weights,
    /// Correction terms through a nested gradient estimate of
    /// `D(P_{t-s} f)` at one uniformly drawn time per outer path.
    Nested { n_inner: usize },
}

impl MonteCarlo<'_> {
    /// `∇d(P_t f)(u0, v0)` on flat models.
    ///
    /// The horizon is split at `τ = t_{N/2}`; `v` carries the weight on
    /// `[τ, t]` and `u` on `[0, τ]`:
    ///
    /// `E f(x_t) [∫_τ^t <Yv, dB> ∫_0^τ <Yu, dB>] / (τ (t-τ))
    ///  + E f(x_t) ∫_0^τ <DY(v)(u) + Y w, dB> / τ`
    ///
    /// with `w` the second variation. The nested variant rewrites the last
    /// term as `(1/τ) ∫_0^τ E D(P_{t-s} f)(x_s)(w_s - DX(v_s)(Y u_s)) ds`.
    pub fn bel_hessian(&self, f: &dyn Observable, u0: &[f64], v0: &[f64], variant: HessianVariant) -> Result<EstimatorResult> {
        if self.model().geometry().is_some() {
            return Err(Error::UnsupportedModel("Hessian estimator on constrained models"));
        }
        self.check_tangent(u0)?;
        self.check_tangent(v0)?;
        let n_steps = self.grid().n_steps();
        let half = n_steps / 2;
        if half == 0 {
            return Err(Error::InvalidParameter("Hessian estimator needs at least two steps".into()));
        }
        if let HessianVariant::Nested { n_inner: 0 } = variant {
            return Err(Error::InvalidParameter("nested variant needs at least one inner path".into()));
        }
        let model = self.model();
        let (n, m) = (model.ambient_dim(), model.noise_dim());
        let t = self.t();
        let tau = self.grid().time(half);
        let mut result = self.estimate(|i| {
            let (noise, traj, v) = self.simulate_with_variation(i, v0, Clock::Forward)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let u = evolve_first_variation(model, &traj, &noise, u0)?;
            let late = ito_weight(model, &traj, &noise, &v, half..n_steps)?;
            let early = ito_weight(model, &traj, &noise, &u, 0..half)?;
            let fx = f.value(traj.terminal());
            let first = fx * late * early / (tau * (t - tau));
            let w = evolve_second_variation(model, &traj, &noise, &u, &v)?;
            match variant {
                HessianVariant::Weights => {
                    let mut a = vec![0.0; m];
                    let mut b = vec![0.0; m];
                    let mut c = 0.0;
                    for k in 0..half {
                        let (x, s) = (traj.state(k), traj.time(k));
                        model.apply_right_inverse_derivative(s, x, v.vector(k), u.vector(k), &mut a)?;
                        model.apply_right_inverse(s, x, w.vector(k), &mut b)?;
                        for j in 0..m {
                            a[j] += b[j];
                        }
                        c += dot(&a, noise.increment(k));
                    }
                    Ok(Some(first + fx * c / tau))
                }
                HessianVariant::Nested { n_inner } => {
                    let k = path_rng(self.seed(), TIME_INDEX_STREAM, i).random_range(0..half);
                    let (x, s) = (traj.state(k), traj.time(k));
                    let mut yu = vec![0.0; m];
                    model.apply_right_inverse(s, x, u.vector(k), &mut yu)?;
                    let mut z = vec![0.0; n];
                    model.apply_diffusion_derivative(s, x, v.vector(k), &yu, &mut z)?;
                    for (zj, wj) in z.iter_mut().zip(w.vector(k)) {
                        *zj = wj - *zj;
                    }
                    if z.iter().all(|&c| c == 0.0) {
                        return Ok(Some(first));
                    }
                    match self.inner_gradient(f, x, &z, k, i, n_inner)? {
                        Some(g) => Ok(Some(first + g)),
                        None => Ok(None),
                    }
                }
            }
        })?;
        if let HessianVariant::Nested { n_inner } = variant {
            result.metadata.insert("n_inner".into(), n_inner as f64);
        }
        result.metadata.insert("split_time".into(), tau);
        Ok(result)
    }

    /// Gradient of `P_{t - t_k} f` at `x` along `z` from `n_inner` paths on
    /// sub-streams of outer path `outer`.
    fn inner_gradient(&self, f: &dyn Observable, x: &[f64], z: &[f64], k: usize, outer: u64, n_inner: usize) -> Result<Option<f64>> {
        let model = self.model();
        let dt = self.grid().dt();
        let remaining = self.grid().n_steps() - k;
        let grid = TimeGrid::new(remaining as f64 * dt, remaining)?;
        let horizon = grid.t_end();
        let opts = self.options(Clock::Offset { start: self.grid().time(k) });
        let mut acc = Vec::with_capacity(n_inner);
        for j in 0..n_inner as u64 {
            let noise = generate_noise_substream(&grid, self.seed(), outer, j + 1, model.noise_dim());
            let (traj, zeta) = integrate_with_variation(model, x, z, &grid, &noise, &opts)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let w = ito_weight(model, &traj, &noise, &zeta, 0..remaining)?;
            acc.push(f.value(traj.terminal()) * w / horizon);
        }
        Ok(Some(crate::linalg::pairwise_sum(&acc) / n_inner as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::flat;
    use crate::models::observable::StandardObservable;

    #[test]
    fn brownian_sine_second_derivative() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let mc = MonteCarlo::new(&m, &[std::f64::consts::FRAC_PI_2], grid, 40_000, 5).unwrap();
        let r = mc.bel_hessian(&StandardObservable::Sin(0), &[1.0], &[1.0], HessianVariant::Weights).unwrap();
        let target = -(-0.5f64).exp();
        assert!((r.mean - target).abs() <= (3.0 * r.std_error).max(0.03 * target.abs()), "{r:?}");
        let nested = mc
            .bel_hessian(&StandardObservable::Sin(0), &[1.0], &[1.0], HessianVariant::Nested { n_inner: 4 })
            .unwrap();
        assert_eq!(nested.mean, r.mean);
    }

    #[test]
    fn variants_agree_on_multiplicative_noise() {
        let m = flat::sine_modulated(0.3).unwrap();
        let grid = TimeGrid::new(0.5, 20).unwrap();
        let f = StandardObservable::Sin(0);
        let mc = MonteCarlo::new(&m, &[0.4], grid, 20_000, 11).unwrap();
        let weights = mc.bel_hessian(&f, &[1.0], &[1.0], HessianVariant::Weights).unwrap();
        let nested = mc.with_paths(4000).unwrap().bel_hessian(&f, &[1.0], &[1.0], HessianVariant::Nested { n_inner: 8 }).unwrap();
        assert!(weights.agrees_with(&nested, 3.5), "{weights:?} {nested:?}");
    }

    #[test]
    fn constrained_models_are_refused() {
        let m = crate::models::sphere::GradientSphere::new(2).unwrap();
        let grid = TimeGrid::new(0.5, 20).unwrap();
        let mc = MonteCarlo::new(&m, &[1.0, 0.0], grid, 10, 1).unwrap();
        assert!(matches!(
            mc.bel_hessian(&StandardObservable::Coordinate(0), &[0.0, 1.0], &[0.0, 1.0], HessianVariant::Weights),
            Err(Error::UnsupportedModel(_))
        ));
    }
}
