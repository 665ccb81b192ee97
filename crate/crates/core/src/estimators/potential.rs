use super::{ito_weight, EstimatorResult, MonteCarlo};
use crate::error::Result;
use crate::linalg::dot;
use crate::models::observable::{Observable, Potential};
use crate::paths::Clock;
use crate::variation::evolve_hessian_flow;

/// Flow used to carry the direction in [`MonteCarlo::potential_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotentialFlow {
    /// First variation `v_t`.
    #[default]
    Variation,
    /// Hessian flow `W_t`.
    HessianFlow,
}

impl MonteCarlo<'_> {
    /// Gradient of `u_t = E u_0(x_t) exp(∫_0^t V_{t-s}(x_s) ds)` where the
    /// coefficients are evaluated at the reversed time `t - s`:
    ///
    /// `(1/t) E u_0(x_t) α_t [Σ_k <Y v_k, ΔB_k> + Σ_k (t - t_k) dV_{t-t_k}(x_k)(v_k) dt]`
    pub fn potential_gradient(&self, f: &dyn Observable, potential: &dyn Potential, v0: &[f64]) -> Result<EstimatorResult> {
        self.potential_gradient_with(f, potential, v0, PotentialFlow::Variation)
    }

    pub fn potential_gradient_with(
        &self,
        f: &dyn Observable,
        potential: &dyn Potential,
        v0: &[f64],
        flow: PotentialFlow,
    ) -> Result<EstimatorResult> {
        self.check_tangent(v0)?;
        let model = self.model();
        let t = self.t();
        let dt = self.grid().dt();
        let bound = potential.upper_bound();
        let n = model.ambient_dim();
        let mut result = self.estimate(|i| {
            let clock = Clock::Reversed { horizon: t };
            let (noise, mut traj, mut v) = self.simulate_with_variation(i, v0, clock)?;
            if traj.blew_up() {
                return Ok(None);
            }
            if flow == PotentialFlow::HessianFlow {
                v = evolve_hessian_flow(model, &traj, v0)?;
            }
            let steps = traj.len() - 1;
            let fk = traj.attach_feynman_kac(potential)?;
            let mut grad = vec![0.0; n];
            let mut corr = 0.0;
            for k in 0..steps {
                let (x, s) = (traj.state(k), traj.time(k));
                potential.gradient(s, x, &mut grad)?;
                corr += s * dot(&grad, v.vector(k)) * dt;
            }
            let weight = ito_weight(model, &traj, &noise, &v, 0..steps)?;
            Ok(Some(f.value(traj.terminal()) * fk * (weight + corr) / t))
        })?;
        result.metadata.insert("potential_bound".into(), bound);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::models::flat;
    use crate::models::observable::{ConstantPotential, FnPotential, StandardObservable};
    use crate::paths::TimeGrid;

    #[test]
    fn zero_potential_reproduces_bel_gradient_bitwise() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let mc = MonteCarlo::new(&m, &[0.2], grid, 2000, 8).unwrap();
        let f = StandardObservable::Sin(0);
        let a = mc.bel_gradient(&f, &[1.0]).unwrap();
        let b = mc.potential_gradient(&f, &ConstantPotential(0.0), &[1.0]).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn linear_potential_against_closed_form() {
        // u_t(x) = E exp(c ∫ (x + B_s) ds) = exp(c t x + c² t³ / 6), so d/dx u_t = c t u_t.
        let c = 0.4;
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let mc = MonteCarlo::new(&m, &[0.0], grid, 40_000, 2).unwrap();
        let v = FnPotential::new(f64::INFINITY, move |_t, x| c * x[0]).with_gradient(move |_t, _x, g| g[0] = c);
        let r = mc.potential_gradient(&StandardObservable::Constant(1.0), &v, &[1.0]).unwrap();
        let target = c * (c * c / 6.0f64).exp();
        assert!((r.mean - target).abs() < 3.0 * r.std_error + 0.01, "{r:?} vs {target}");
    }

    #[test]
    fn bound_violation_is_an_error() {
        let m = flat::brownian(1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let mc = MonteCarlo::new(&m, &[0.0], grid, 10, 2).unwrap();
        let v = FnPotential::new(0.0, |_t, _x| 1.0).with_gradient(|_t, _x, g| g[0] = 0.0);
        assert!(matches!(
            mc.potential_gradient(&StandardObservable::Sin(0), &v, &[1.0]),
            Err(Error::UnboundedPotential { .. })
        ));
    }
}
