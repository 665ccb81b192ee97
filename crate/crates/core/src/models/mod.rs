//! Diffusion scenarios: coefficient fields with their derivatives, right
//! inverses and (for constrained models) the embedded manifold geometry.
//!
//! Coefficients are exposed in "apply" form (`X(x) db`, `DX(x)(u) db`, ...)
//! rather than as materialized matrices, which keeps the per-step hot path
//! allocation free.

pub mod flat;
pub mod geometry;
pub mod lie;
pub mod observable;
pub mod sphere;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
pub use geometry::ManifoldGeometry;
pub use lie::{LieGroupModel, So3Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Flat,
    GradientSphere,
    Circle,
    LieGroup,
    Custom,
}

/// Scratch buffers for one path. Sized by `(ambient_dim, noise_dim)`.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    pub(crate) y: Vec<f64>,
    pub(crate) a: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) c: Vec<f64>,
    pub(crate) drift: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            drift: vec![0.0; n],
        }
    }
}

/// A diffusion `dx = X(x) dB + Z(x) dt` on `R^n`, possibly constrained to an
/// embedded manifold.
///
/// Only [`apply_diffusion`](Self::apply_diffusion) and one of the drifts are
/// mandatory. Missing derivatives surface as [`Error::MissingDerivative`]
/// from the estimators that need them.
///
/// Every callback takes the time argument `t`; autonomous models ignore it.
/// Implementations must be pure: estimators call them concurrently.
pub trait DiffusionModel: Send + Sync {
    fn ambient_dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn kind(&self) -> ModelKind;

    /// `out = X(x) db`
    fn apply_diffusion(&self, t: f64, x: &[f64], db: &[f64], out: &mut [f64]);

    /// Stratonovich drift `A`.
    fn stratonovich_drift(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("Stratonovich drift A"))
    }

    /// Itô drift `Z`. Defaults to `A + ½ Σ DX^i(X^i)`.
    fn ito_drift(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        crate::paths::stratonovich_to_ito_drift(self, t, x, out)
    }

    /// `out = DX(x)(u) db`
    fn apply_diffusion_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _u: &[f64],
        _db: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingDerivative("DX"))
    }

    /// `out = DZ(x)(u)`
    fn drift_derivative(&self, _t: f64, _x: &[f64], _u: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("DZ"))
    }

    /// `out = D²X(x)(u, v) db`
    fn apply_diffusion_second_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _u: &[f64],
        _v: &[f64],
        _db: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingDerivative("D2X"))
    }

    /// `out = D²Z(x)(u, v)`
    fn drift_second_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _u: &[f64],
        _v: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingDerivative("D2Z"))
    }

    /// `out = Y(x) v` with `Y` a right inverse of `X` on the tangent space.
    fn apply_right_inverse(&self, t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        right_inverse_apply(self, t, x, v, out)
    }

    /// `out = DY(x)(u)(v)`
    fn apply_right_inverse_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _u: &[f64],
        _v: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingDerivative("DY"))
    }

    fn geometry(&self) -> Option<&dyn ManifoldGeometry> {
        None
    }

    /// Covariant derivative `∇Z(x)(v)` of the generator drift (`A = ½Δ + Z`)
    /// for tangent `v`. Flat models reuse [`drift_derivative`](Self::drift_derivative).
    fn generator_drift_derivative(&self, t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        if self.geometry().is_some() {
            Err(Error::MissingGeometry)
        } else {
            self.drift_derivative(t, x, v, out)
        }
    }

    fn lie_group(&self) -> Option<&LieGroupModel> {
        None
    }

    /// True when `X(x)e` is the gradient of `<f(x), e>` for an isometric
    /// embedding `f` (so `Σ ∇X^i(X^i) = 0`). Flat models with constant
    /// identity noise qualify.
    fn is_gradient_system(&self) -> bool {
        false
    }

    /// True when some derivatives are finite-difference approximations.
    fn has_finite_difference_derivatives(&self) -> bool {
        false
    }

    /// One step of the path integrator. Default: Euler–Maruyama on the Itô
    /// form followed by the geometry's retraction.
    fn step(&self, t: f64, dt: f64, x: &[f64], db: &[f64], out: &mut [f64], ws: &mut StepWorkspace) -> Result<()> {
        euler_step(self, t, dt, x, db, out, ws)
    }

    /// Derivative of [`step`](Self::step) in `x` applied to `v`.
    #[allow(clippy::too_many_arguments)]
    fn step_tangent(
        &self,
        t: f64,
        dt: f64,
        x: &[f64],
        db: &[f64],
        v: &[f64],
        out: &mut [f64],
        ws: &mut StepWorkspace,
    ) -> Result<()> {
        euler_step_tangent(self, t, dt, x, db, v, out, ws)
    }

    /// [`step`](Self::step) and [`step_tangent`](Self::step_tangent) in one
    /// call; results are bit-identical to the separate calls.
    #[allow(clippy::too_many_arguments)]
    fn step_with_tangent(
        &self,
        t: f64,
        dt: f64,
        x: &[f64],
        db: &[f64],
        v: &[f64],
        x_out: &mut [f64],
        v_out: &mut [f64],
        ws: &mut StepWorkspace,
    ) -> Result<()> {
        euler_step_with_tangent(self, t, dt, x, db, v, x_out, v_out, ws)
    }

    /// Second derivative of the discrete flow: maps `(u_k, v_k, w_k)` to
    /// `w_{k+1}`.
    #[allow(clippy::too_many_arguments)]
    fn step_second(
        &self,
        t: f64,
        dt: f64,
        x: &[f64],
        db: &[f64],
        u: &[f64],
        v: &[f64],
        w: &[f64],
        out: &mut [f64],
        ws: &mut StepWorkspace,
    ) -> Result<()> {
        euler_step_second(self, t, dt, x, db, u, v, w, out, ws)
    }
}

/// Pre-retraction Euler point `y = x + X(x) db + Z(x) dt`.
fn euler_point<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    y: &mut [f64],
    drift: &mut [f64],
) -> Result<()> {
    model.apply_diffusion(t, x, db, y);
    model.ito_drift(t, x, drift)?;
    for ((yi, xi), zi) in y.iter_mut().zip(x).zip(drift.iter()) {
        *yi = xi + *yi + zi * dt;
    }
    Ok(())
}

pub fn euler_step<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    out: &mut [f64],
    ws: &mut StepWorkspace,
) -> Result<()> {
    match model.geometry() {
        None => euler_point(model, t, dt, x, db, out, &mut ws.drift),
        Some(g) => {
            euler_point(model, t, dt, x, db, &mut ws.y, &mut ws.drift)?;
            g.retract(&ws.y, out);
            Ok(())
        }
    }
}

/// `v + DX(x)(v) db + DZ(x)(v) dt`
#[allow(clippy::too_many_arguments)]
fn linearized_increment<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    v: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    model.apply_diffusion_derivative(t, x, v, db, out)?;
    model.drift_derivative(t, x, v, scratch)?;
    for ((oi, vi), si) in out.iter_mut().zip(v).zip(scratch.iter()) {
        *oi = vi + *oi + si * dt;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn euler_step_tangent<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    v: &[f64],
    out: &mut [f64],
    ws: &mut StepWorkspace,
) -> Result<()> {
    match model.geometry() {
        None => linearized_increment(model, t, dt, x, db, v, out, &mut ws.a),
        Some(g) => {
            linearized_increment(model, t, dt, x, db, v, &mut ws.b, &mut ws.a)?;
            euler_point(model, t, dt, x, db, &mut ws.y, &mut ws.drift)?;
            g.retract_derivative(&ws.y, &ws.b, out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn euler_step_with_tangent<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    v: &[f64],
    x_out: &mut [f64],
    v_out: &mut [f64],
    ws: &mut StepWorkspace,
) -> Result<()> {
    match model.geometry() {
        None => {
            model.step(t, dt, x, db, x_out, ws)?;
            model.step_tangent(t, dt, x, db, v, v_out, ws)
        }
        Some(g) => {
            euler_point(model, t, dt, x, db, &mut ws.y, &mut ws.drift)?;
            g.retract(&ws.y, x_out);
            linearized_increment(model, t, dt, x, db, v, &mut ws.b, &mut ws.a)?;
            g.retract_derivative(&ws.y, &ws.b, v_out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn euler_step_second<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    x: &[f64],
    db: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
    out: &mut [f64],
    ws: &mut StepWorkspace,
) -> Result<()> {
    let n = x.len();
    // a = w + DX(w)db + DZ(w)dt + D²X(u,v)db + D²Z(u,v)dt
    let mut a = std::mem::take(&mut ws.c);
    linearized_increment(model, t, dt, x, db, w, &mut a, &mut ws.a)?;
    model.apply_diffusion_second_derivative(t, x, u, v, db, &mut ws.b)?;
    linalg::axpy(1.0, &ws.b, &mut a);
    model.drift_second_derivative(t, x, u, v, &mut ws.b)?;
    linalg::axpy(dt, &ws.b, &mut a);
    let result = match model.geometry() {
        None => {
            out.copy_from_slice(&a);
            Ok(())
        }
        Some(g) => (|| {
            let mut ut = vec![0.0; n];
            let mut vt = vec![0.0; n];
            linearized_increment(model, t, dt, x, db, u, &mut ut, &mut ws.a)?;
            linearized_increment(model, t, dt, x, db, v, &mut vt, &mut ws.a)?;
            euler_point(model, t, dt, x, db, &mut ws.y, &mut ws.drift)?;
            g.retract_derivative(&ws.y, &a, out)?;
            g.retract_second_derivative(&ws.y, &ut, &vt, &mut ws.b)?;
            linalg::axpy(1.0, &ws.b, out);
            Ok(())
        })(),
    };
    ws.c = a;
    result
}

/// Materializes `X(x)` as a row-major `n x m` matrix.
pub fn diffusion_matrix<M: DiffusionModel + ?Sized>(model: &M, t: f64, x: &[f64]) -> Vec<f64> {
    let (n, m) = (model.ambient_dim(), model.noise_dim());
    let mut mat = vec![0.0; n * m];
    let mut e = vec![0.0; m];
    let mut col = vec![0.0; n];
    for j in 0..m {
        e.fill(0.0);
        e[j] = 1.0;
        model.apply_diffusion(t, x, &e, &mut col);
        for i in 0..n {
            mat[i * m + j] = col[i];
        }
    }
    mat
}

/// Right inverse `Y(x) = X(x)^T (X(x) X(x)^T)^{-1}` applied to `v`. Fails
/// with [`Error::Degenerate`] when `X X^T` is singular to relative tolerance
/// `1e-12`, which is always the case for constrained models (they override
/// [`DiffusionModel::apply_right_inverse`]).
pub fn right_inverse_apply<M: DiffusionModel + ?Sized>(
    model: &M,
    t: f64,
    x: &[f64],
    v: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let (n, m) = (model.ambient_dim(), model.noise_dim());
    let xm = diffusion_matrix(model, t, x);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = linalg::dot(&xm[i * m..(i + 1) * m], &xm[j * m..(j + 1) * m]);
        }
    }
    let mut z = v.to_vec();
    linalg::solve_in_place(&mut gram, n, &mut z, 1e-12)?;
    linalg::mat_t_vec(&xm, n, m, &z, out);
    Ok(())
}

/// `Y(x)` as a row-major `m x n` matrix.
pub fn right_inverse<M: DiffusionModel + ?Sized>(model: &M, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (model.ambient_dim(), model.noise_dim());
    let mut y = vec![0.0; m * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        model.apply_right_inverse(t, x, &e, &mut col)?;
        for i in 0..m {
            y[i * n + j] = col[i];
        }
    }
    Ok(y)
}

/// Checks that `x` lies on the model's constraint set (within `1e-9`) and has
/// the right dimension.
pub fn validate_point<M: DiffusionModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "point",
            expected: model.ambient_dim(),
            got: x.len(),
        });
    }
    if let Some(g) = model.geometry() {
        let r = g.constraint_violation(x);
        if !(r <= crate::paths::CONSTRAINT_TOLERANCE) {
            return Err(Error::InvalidParameter(format!(
                "point is off the manifold (constraint residual {r:e})"
            )));
        }
    }
    Ok(())
}

/// Checks that `v` is tangent at `x` (within `1e-8`).
pub fn validate_tangent<M: DiffusionModel + ?Sized>(model: &M, x: &[f64], v: &[f64]) -> Result<()> {
    if v.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "tangent vector",
            expected: model.ambient_dim(),
            got: v.len(),
        });
    }
    if let Some(g) = model.geometry() {
        let mut p = vec![0.0; v.len()];
        g.project_tangent(x, v, &mut p);
        let off: f64 = v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if off > 1e-8 * (1.0 + linalg::norm(v)) {
            return Err(Error::InvalidParameter(format!(
                "vector is not tangent at the base point (normal part {off:e})"
            )));
        }
    }
    Ok(())
}
