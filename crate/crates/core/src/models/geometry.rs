use crate::error::{Error, Result};

/// Riemannian data of a manifold embedded in `R^n`.
pub trait ManifoldGeometry: Send + Sync {
    fn ambient_dim(&self) -> usize;

    fn intrinsic_dim(&self) -> usize;

    /// Distance-like residual of the defining constraint; zero on the manifold.
    fn constraint_violation(&self, x: &[f64]) -> f64;

    /// Orthogonal projection of `v` onto `T_x M`.
    fn project_tangent(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// Map an ambient point near the manifold back onto it.
    fn retract(&self, y: &[f64], out: &mut [f64]);

    /// `DR(y)(a)`
    fn retract_derivative(&self, _y: &[f64], _a: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::UnsupportedModel("retraction derivative"))
    }

    /// `D²R(y)(a, b)`
    fn retract_second_derivative(&self, _y: &[f64], _a: &[f64], _b: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::UnsupportedModel("retraction second derivative"))
    }

    /// `Ric_x(u, v)` for tangent `u, v`.
    fn ricci(&self, x: &[f64], u: &[f64], v: &[f64]) -> f64;

    /// `Ric^#_x(v)`
    fn ricci_sharp(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// Point at parameter `s` on the geodesic through `x` with velocity `v`.
    fn geodesic(&self, x: &[f64], v: &[f64], s: f64, out: &mut [f64]);

    /// Orthonormal basis of `T_x M`.
    fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>>;

    /// Laplace–Beltrami of `f` at `x` from its ambient gradient and row-major
    /// ambient Hessian.
    fn laplacian(&self, _x: &[f64], _grad: &[f64], _hess: &[f64]) -> Result<f64> {
        Err(Error::UnsupportedModel("Laplace-Beltrami operator"))
    }

    /// Quadrature nodes and weights covering the manifold, if available.
    fn quadrature(&self, _n_points: usize) -> Option<Vec<(Vec<f64>, f64)>> {
        None
    }
}
