//! Left-invariant Brownian motion on SO(3), stored as row-major 3x3 matrices
//! in `R^9` with the Frobenius (bi-invariant) metric.

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::{DiffusionModel, ManifoldGeometry, ModelKind, StepWorkspace};
use crate::error::{Error, Result};

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn to_matrix(x: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&x[..9])
}

pub fn write_matrix(m: &Matrix3<f64>, out: &mut [f64]) {
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
}

/// `Σ c_i E_i` where `E_i = L_i / √2` is a Frobenius-orthonormal basis of so(3).
pub fn hat(c: &[f64]) -> Matrix3<f64> {
    let (w1, w2, w3) = (c[0] * INV_SQRT2, c[1] * INV_SQRT2, c[2] * INV_SQRT2);
    Matrix3::new(0.0, -w3, w2, w3, 0.0, -w1, -w2, w1, 0.0)
}

/// Coordinates `<A, E_i>_F`; only the skew part of `A` contributes.
pub fn vee(a: &Matrix3<f64>) -> [f64; 3] {
    [
        (a[(2, 1)] - a[(1, 2)]) * INV_SQRT2,
        (a[(0, 2)] - a[(2, 0)]) * INV_SQRT2,
        (a[(1, 0)] - a[(0, 1)]) * INV_SQRT2,
    ]
}

/// `exp(Σ c_i E_i)`
pub fn exp(c: &[f64]) -> Matrix3<f64> {
    Rotation3::new(Vector3::new(c[0], c[1], c[2]) * INV_SQRT2).into_inner()
}

fn skew_axis(a: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

/// SO(3) as a Riemannian submanifold of `R^9`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct So3Geometry;

impl ManifoldGeometry for So3Geometry {
    fn ambient_dim(&self) -> usize {
        9
    }

    fn intrinsic_dim(&self) -> usize {
        3
    }

    fn constraint_violation(&self, x: &[f64]) -> f64 {
        let g = to_matrix(x);
        let r = (g.transpose() * g - Matrix3::identity()).norm();
        if g.determinant() > 0.0 {
            r
        } else {
            r + 1.0
        }
    }

    fn project_tangent(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let g = to_matrix(x);
        let a = g.transpose() * to_matrix(v);
        write_matrix(&(g * (a - a.transpose()) * 0.5), out);
    }

    fn retract(&self, y: &[f64], out: &mut [f64]) {
        let svd = to_matrix(y).svd(true, true);
        let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
            out.fill(f64::NAN);
            return;
        };
        if (u * v_t).determinant() < 0.0 {
            let mut col = u.column_mut(2);
            col *= -1.0;
        }
        write_matrix(&(u * v_t), out);
    }

    fn ricci(&self, _x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        0.25 * crate::linalg::dot(u, v)
    }

    fn ricci_sharp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..9 {
            out[i] = 0.25 * v[i];
        }
    }

    fn geodesic(&self, x: &[f64], v: &[f64], s: f64, out: &mut [f64]) {
        let g = to_matrix(x);
        let w = skew_axis(&(g.transpose() * to_matrix(v)));
        write_matrix(&(g * Rotation3::new(w * s).into_inner()), out);
    }

    fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let g = to_matrix(x);
        (0..3)
            .map(|i| {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                let mut out = vec![0.0; 9];
                write_matrix(&(g * hat(&e)), &mut out);
                out
            })
            .collect()
    }
}

/// Left-invariant diffusion `dg = g ∘ (σ Σ E_i dB^i + â dt)` on SO(3).
///
/// The integrator steps multiplicatively, `g_{k+1} = g_k exp(σ ΔB̂ + â dt)`,
/// so paths stay on the group to rounding error.
#[derive(Debug, Clone, PartialEq)]
pub struct LieGroupModel {
    sigma: f64,
    drift: [f64; 3],
    geometry: So3Geometry,
}

impl LieGroupModel {
    pub fn so3(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise scale must be positive, got {sigma}")));
        }
        Ok(Self {
            sigma,
            drift: [0.0; 3],
            geometry: So3Geometry,
        })
    }

    /// Left-invariant drift with Lie algebra coordinates `a`.
    pub fn with_drift(mut self, a: [f64; 3]) -> Self {
        self.drift = a;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> [f64; 3] {
        self.drift
    }

    pub fn lie_algebra_dim(&self) -> usize {
        3
    }

    /// `Ad(g) ξ = vee(g ξ̂ g^T)`
    pub fn adjoint(&self, g: &[f64], xi: &[f64]) -> [f64; 3] {
        let g = to_matrix(g);
        vee(&(g * hat(xi) * g.transpose()))
    }

    /// Left translation of an algebra element to a tangent vector at `g`.
    pub fn left_translate(&self, g: &[f64], xi: &[f64], out: &mut [f64]) {
        write_matrix(&(to_matrix(g) * hat(xi)), out);
    }

    fn step_factor(&self, dt: f64, db: &[f64]) -> Matrix3<f64> {
        let c = [
            self.sigma * db[0] + self.drift[0] * dt,
            self.sigma * db[1] + self.drift[1] * dt,
            self.sigma * db[2] + self.drift[2] * dt,
        ];
        exp(&c)
    }
}

impl DiffusionModel for LieGroupModel {
    fn ambient_dim(&self) -> usize {
        9
    }

    fn noise_dim(&self) -> usize {
        3
    }

    fn kind(&self) -> ModelKind {
        ModelKind::LieGroup
    }

    fn apply_diffusion(&self, _t: f64, x: &[f64], db: &[f64], out: &mut [f64]) {
        write_matrix(&(to_matrix(x) * hat(db) * self.sigma), out);
    }

    fn stratonovich_drift(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        write_matrix(&(to_matrix(x) * hat(&self.drift)), out);
        Ok(())
    }

    fn apply_diffusion_derivative(&self, _t: f64, _x: &[f64], u: &[f64], db: &[f64], out: &mut [f64]) -> Result<()> {
        write_matrix(&(to_matrix(u) * hat(db) * self.sigma), out);
        Ok(())
    }

    fn drift_derivative(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let u = to_matrix(u);
        write_matrix(&(u * hat(&self.drift) - u * (0.5 * self.sigma * self.sigma)), out);
        Ok(())
    }

    fn apply_diffusion_second_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _u: &[f64],
        _v: &[f64],
        _db: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn drift_second_derivative(&self, _t: f64, _x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn apply_right_inverse(&self, _t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let c = vee(&(to_matrix(x).transpose() * to_matrix(v)));
        for i in 0..3 {
            out[i] = c[i] / self.sigma;
        }
        Ok(())
    }

    fn apply_right_inverse_derivative(&self, _t: f64, _x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let c = vee(&(to_matrix(u).transpose() * to_matrix(v)));
        for i in 0..3 {
            out[i] = c[i] / self.sigma;
        }
        Ok(())
    }

    fn geometry(&self) -> Option<&dyn ManifoldGeometry> {
        Some(&self.geometry)
    }

    fn generator_drift_derivative(&self, _t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let g = to_matrix(x);
        let xi = g.transpose() * to_matrix(v);
        let a = hat(&self.drift);
        write_matrix(&(g * (xi * a - a * xi) * 0.5), out);
        Ok(())
    }

    fn lie_group(&self) -> Option<&LieGroupModel> {
        Some(self)
    }

    fn step(&self, _t: f64, dt: f64, x: &[f64], db: &[f64], out: &mut [f64], _ws: &mut StepWorkspace) -> Result<()> {
        write_matrix(&(to_matrix(x) * self.step_factor(dt, db)), out);
        Ok(())
    }

    fn step_tangent(
        &self,
        _t: f64,
        dt: f64,
        _x: &[f64],
        db: &[f64],
        v: &[f64],
        out: &mut [f64],
        _ws: &mut StepWorkspace,
    ) -> Result<()> {
        write_matrix(&(to_matrix(v) * self.step_factor(dt, db)), out);
        Ok(())
    }

    fn step_with_tangent(
        &self,
        _t: f64,
        dt: f64,
        x: &[f64],
        db: &[f64],
        v: &[f64],
        x_out: &mut [f64],
        v_out: &mut [f64],
        _ws: &mut StepWorkspace,
    ) -> Result<()> {
        let e = self.step_factor(dt, db);
        write_matrix(&(to_matrix(x) * e), x_out);
        write_matrix(&(to_matrix(v) * e), v_out);
        Ok(())
    }

    fn step_second(
        &self,
        _t: f64,
        dt: f64,
        _x: &[f64],
        db: &[f64],
        _u: &[f64],
        _v: &[f64],
        w: &[f64],
        out: &mut [f64],
        _ws: &mut StepWorkspace,
    ) -> Result<()> {
        write_matrix(&(to_matrix(w) * self.step_factor(dt, db)), out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_rotation() -> Vec<f64> {
        let mut g = vec![0.0; 9];
        write_matrix(&exp(&[0.3, -1.1, 0.6]), &mut g);
        g
    }

    #[test]
    fn hat_and_vee_are_inverse() {
        let c = [0.4, -0.2, 1.3];
        let back = vee(&hat(&c));
        for i in 0..3 {
            assert_relative_eq!(back[i], c[i], epsilon = 1e-15);
        }
        assert_relative_eq!(hat(&[1.0, 0.0, 0.0]).norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn adjoint_of_rotation_is_the_rotation() {
        let m = LieGroupModel::so3(1.0).unwrap();
        let g = sample_rotation();
        let xi = [0.5, 0.1, -0.7];
        let ad = m.adjoint(&g, &xi);
        let gm = to_matrix(&g);
        let direct = gm * Vector3::new(xi[0], xi[1], xi[2]);
        for i in 0..3 {
            assert_relative_eq!(ad[i], direct[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn right_inverse_undoes_diffusion() {
        let m = LieGroupModel::so3(0.7).unwrap();
        let g = sample_rotation();
        let e = [0.2, -0.5, 0.9];
        let mut v = [0.0; 9];
        let mut back = [0.0; 3];
        m.apply_diffusion(0.0, &g, &e, &mut v);
        m.apply_right_inverse(0.0, &g, &v, &mut back).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back[i], e[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn generic_ito_drift_is_minus_half_sigma_squared() {
        let m = LieGroupModel::so3(0.8).unwrap();
        let g = sample_rotation();
        let mut z = [0.0; 9];
        m.ito_drift(0.0, &g, &mut z).unwrap();
        for i in 0..9 {
            assert_relative_eq!(z[i], -0.32 * g[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn retraction_and_step_stay_on_group() {
        let geo = So3Geometry;
        let g = sample_rotation();
        let mut y = g.clone();
        y[0] += 0.05;
        y[5] -= 0.03;
        let mut r = [0.0; 9];
        geo.retract(&y, &mut r);
        assert!(geo.constraint_violation(&r) < 1e-12);
        let m = LieGroupModel::so3(1.0).unwrap().with_drift([0.1, 0.2, 0.3]);
        let mut ws = StepWorkspace::new(9);
        m.step(0.0, 0.01, &g, &[0.3, -0.2, 0.1], &mut r, &mut ws).unwrap();
        assert!(geo.constraint_violation(&r) < 1e-13);
    }

    #[test]
    fn geodesic_starts_with_given_velocity() {
        let geo = So3Geometry;
        let g = sample_rotation();
        let mut v = [0.0; 9];
        write_matrix(&(to_matrix(&g) * hat(&[0.3, 0.4, -0.2])), &mut v);
        let h = 1e-6;
        let mut p = [0.0; 9];
        let mut q = [0.0; 9];
        geo.geodesic(&g, &v, h, &mut p);
        geo.geodesic(&g, &v, -h, &mut q);
        for i in 0..9 {
            assert_relative_eq!((p[i] - q[i]) / (2.0 * h), v[i], epsilon = 1e-8);
        }
    }
}
