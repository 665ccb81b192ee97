use super::{ito_weight, EstimatorResult, MonteCarlo};
use crate::error::Result;
use crate::linalg::dot;
use crate::models::observable::Observable;
use crate::paths::Clock;
use crate::variation::evolve_hessian_flow;

impl MonteCarlo<'_> {
    /// `P_t f(x0) = E f(x_t)`.
    pub fn semigroup_value(&self, f: &dyn Observable) -> Result<EstimatorResult> {
        self.estimate(|i| {
            let (_, traj) = self.simulate(i)?;
            Ok((!traj.blew_up()).then(|| f.value(traj.terminal())))
        })
    }

    /// `E df(x_t)(v_t)`; needs the gradient of `f`.
    pub fn pathwise_gradient(&self, f: &dyn Observable, v0: &[f64]) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let n = self.model().ambient_dim();
        self.estimate(|i| {
            let (_, traj, v) = self.simulate_with_variation(i, v0, Clock::Forward)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let mut grad = vec![0.0; n];
            f.gradient(traj.terminal(), &mut grad)?;
            Ok(Some(dot(&grad, v.terminal())))
        })
    }

    /// Derivative-free gradient `(1/t) E f(x_t) Σ_k <Y(x_k) v_k, ΔB_k>`.
    pub fn bel_gradient(&self, f: &dyn Observable, v0: &[f64]) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let t = self.t();
        self.estimate(|i| {
            let (noise, traj, v) = self.simulate_with_variation(i, v0, Clock::Forward)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let w = ito_weight(self.model(), &traj, &noise, &v, 0..traj.len() - 1)?;
            Ok(Some(f.value(traj.terminal()) * w / t))
        })
    }

    /// The stochastic weight `Σ_k <Y(x_k) v_k, ΔB_k>` alone (mean zero when
    /// it is a martingale). Metadata `quadratic_variation` holds the
    /// estimate of `∫ E|Y v|² ds`.
    pub fn weight_statistics(&self, v0: &[f64]) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let m = self.model().noise_dim();
        let dt = self.grid().dt();
        let pairs = self.map_paths(|i| {
            let (noise, traj, v) = self.simulate_with_variation(i, v0, Clock::Forward)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let mut buf = vec![0.0; m];
            let (mut w, mut qv) = (0.0, 0.0);
            for k in 0..traj.len() - 1 {
                self.model().apply_right_inverse(traj.time(k), traj.state(k), v.vector(k), &mut buf)?;
                w += dot(&buf, noise.increment(k));
                qv += dot(&buf, &buf) * dt;
            }
            Ok(Some((w, qv)))
        })?;
        let weights: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|(w, _)| w)).collect();
        let qvs: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|(_, q)| q)).collect();
        let mut result = super::summarize(&weights, self.seed(), self.grid())?;
        let qv = super::summarize(&qvs, self.seed(), self.grid())?;
        result.metadata.insert("quadratic_variation".into(), qv.mean);
        result.metadata.insert("quadratic_variation_se".into(), qv.std_error);
        Ok(result)
    }

    /// `(1/t) E f(x_t) Σ_k <Y(x_k) W_k, ΔB_k>` with the Hessian flow `W`;
    /// valid for bounded measurable `f`.
    pub fn hessian_flow_gradient(&self, f: &dyn Observable, v0: &[f64]) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let t = self.t();
        self.estimate(|i| {
            let (noise, traj) = self.simulate(i)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let w = evolve_hessian_flow(self.model(), &traj, v0)?;
            let weight = ito_weight(self.model(), &traj, &noise, &w, 0..traj.len() - 1)?;
            Ok(Some(f.value(traj.terminal()) * weight / t))
        })
    }

    /// Central difference of `P_t f` along `v0` (a geodesic on manifolds)
    /// with common random numbers; the per-path differences are averaged.
    pub fn finite_difference_gradient(&self, f: &dyn Observable, v0: &[f64], delta: f64) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        if !(delta > 0.0) {
            return Err(crate::Error::InvalidParameter(format!("step must be positive, got {delta}")));
        }
        let n = self.model().ambient_dim();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        match self.model().geometry() {
            Some(g) => {
                g.geodesic(self.x0(), v0, delta, &mut plus);
                g.geodesic(self.x0(), v0, -delta, &mut minus);
                let mut tmp = vec![0.0; n];
                g.retract(&plus, &mut tmp);
                plus.copy_from_slice(&tmp);
                g.retract(&minus, &mut tmp);
                minus.copy_from_slice(&tmp);
            }
            None => {
                for k in 0..n {
                    plus[k] = self.x0()[k] + delta * v0[k];
                    minus[k] = self.x0()[k] - delta * v0[k];
                }
            }
        }
        let clock = Clock::Forward;
        let mut result = self.estimate(|i| {
            let (_, tp) = self.simulate_from(&plus, i, clock)?;
            let (_, tm) = self.simulate_from(&minus, i, clock)?;
            if tp.blew_up() || tm.blew_up() {
                return Ok(None);
            }
            Ok(Some((f.value(tp.terminal()) - f.value(tm.terminal())) / (2.0 * delta)))
        })?;
        result.metadata.insert("delta".into(), delta);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::flat;
    use crate::models::observable::StandardObservable;
    use crate::paths::TimeGrid;

    fn within(r: &EstimatorResult, target: f64, rel: f64) -> bool {
        (r.mean - target).abs() <= (3.0 * r.std_error).max(rel * target.abs())
    }

    #[test]
    fn brownian_sine_gradient() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let mc = MonteCarlo::new(&m, &[0.0], grid, 20_000, 42).unwrap();
        let target = (-0.5f64).exp();
        let bel = mc.bel_gradient(&StandardObservable::Sin(0), &[1.0]).unwrap();
        let pw = mc.pathwise_gradient(&StandardObservable::Sin(0), &[1.0]).unwrap();
        assert!(within(&bel, target, 0.0), "{bel:?}");
        assert!(within(&pw, target, 0.0), "{pw:?}");
        assert!(bel.agrees_with(&pw, 3.0));
    }

    #[test]
    fn zero_direction_gives_exact_zero() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let mc = MonteCarlo::new(&m, &[0.3], grid, 500, 1).unwrap();
        let r = mc.pathwise_gradient(&StandardObservable::Sin(0), &[0.0]).unwrap();
        assert_eq!(r.mean, 0.0);
        let r = mc.bel_gradient(&StandardObservable::Sin(0), &[0.0]).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn ou_linear_observable() {
        let m = flat::ornstein_uhlenbeck(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let mc = MonteCarlo::new(&m, &[0.0], grid, 20_000, 3).unwrap();
        let target = (-1f64).exp();
        let pw = mc.pathwise_gradient(&StandardObservable::Coordinate(0), &[1.0]).unwrap();
        assert!((pw.mean - (1.0 - grid.dt()).powi(200)).abs() < 1e-12);
        assert!(pw.std_error < 1e-12);
        let bel = mc.bel_gradient(&StandardObservable::Coordinate(0), &[1.0]).unwrap();
        assert!(within(&bel, target, 0.01), "{bel:?}");
        let fd = mc.finite_difference_gradient(&StandardObservable::Coordinate(0), &[1.0], 1e-3).unwrap();
        assert!((fd.mean - pw.mean).abs() < 1e-9);
    }

    #[test]
    fn constant_observable_gives_zero_fd_exactly() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let mc = MonteCarlo::new(&m, &[0.0], grid, 100, 1).unwrap();
        let fd = mc.finite_difference_gradient(&StandardObservable::Constant(2.0), &[1.0], 1e-3).unwrap();
        assert_eq!(fd.mean, 0.0);
    }

    #[test]
    fn doubling_the_direction_doubles_the_estimate_bitwise() {
        let m = crate::models::sphere::GradientSphere::new(3).unwrap();
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let mc = MonteCarlo::new(&m, &[1.0, 0.0, 0.0], grid, 200, 9).unwrap();
        let f = StandardObservable::Coordinate(2);
        let a = mc.bel_gradient(&f, &[0.0, 0.3, 0.4]).unwrap();
        let b = mc.bel_gradient(&f, &[0.0, 0.6, 0.8]).unwrap();
        assert_eq!(2.0 * a.mean, b.mean);
    }
}
