use super::{EstimatorResult, MonteCarlo};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::models::lie::{to_matrix, write_matrix};
use crate::models::observable::Observable;

impl MonteCarlo<'_> {
    /// Gradient on a Lie group along the left-translated direction
    /// `x0 · ξ̂0`, with weight `(1/σ) Σ_k <Ad(h_k^{-1}) ξ0, ΔB_k>` where
    /// `h_k = x0^{-1} g_k`. No variation flow is integrated.
    pub fn lie_group_gradient(&self, f: &dyn Observable, xi0: &[f64]) -> Result<EstimatorResult> {
        let group = self.model().lie_group().ok_or(Error::NotLieGroup)?;
        if xi0.len() != group.lie_algebra_dim() {
            return Err(Error::DimensionMismatch {
                what: "Lie algebra direction",
                expected: group.lie_algebra_dim(),
                got: xi0.len(),
            });
        }
        let t = self.t();
        let g0_inv = to_matrix(self.x0()).transpose();
        self.estimate(|i| {
            let (noise, traj) = self.simulate(i)?;
            if traj.blew_up() {
                return Ok(None);
            }
            let mut h_inv = [0.0; 9];
            let mut w = 0.0;
            for k in 0..traj.len() - 1 {
                let h = g0_inv * to_matrix(traj.state(k));
                write_matrix(&h.transpose(), &mut h_inv);
                let a = group.adjoint(&h_inv, xi0);
                w += dot(&a, noise.increment(k));
            }
            Ok(Some(f.value(traj.terminal()) * (w / group.sigma()) / t))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::observable::StandardObservable;
    use crate::models::LieGroupModel;
    use crate::paths::TimeGrid;

    const ID: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

    #[test]
    fn matches_generic_estimator_on_same_paths() {
        let m = LieGroupModel::so3(1.0).unwrap();
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let mc = MonteCarlo::new(&m, &ID, grid, 2000, 6).unwrap();
        let f = StandardObservable::MatrixEntry(0, 1);
        let xi = [0.0, 0.0, 1.0];
        let lie = mc.lie_group_gradient(&f, &xi).unwrap();
        let mut v0 = [0.0; 9];
        m.left_translate(&ID, &xi, &mut v0);
        let generic = mc.bel_gradient(&f, &v0).unwrap();
        assert!((lie.mean - generic.mean).abs() < 1e-9, "{lie:?} {generic:?}");
    }

    #[test]
    fn zero_direction_and_flat_model() {
        let m = LieGroupModel::so3(1.0).unwrap();
        let grid = TimeGrid::new(0.5, 10).unwrap();
        let mc = MonteCarlo::new(&m, &ID, grid, 50, 6).unwrap();
        assert_eq!(mc.lie_group_gradient(&StandardObservable::Trace, &[0.0; 3]).unwrap().mean, 0.0);
        let b = crate::models::flat::brownian(1).unwrap();
        let mc = MonteCarlo::new(&b, &[0.0], grid, 5, 1).unwrap();
        assert_eq!(mc.lie_group_gradient(&StandardObservable::Sin(0), &[1.0, 0.0, 0.0]), Err(Error::NotLieGroup));
    }
}
