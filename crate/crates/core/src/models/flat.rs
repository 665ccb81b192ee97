//! Diffusions on `R^n` assembled from closures.

use std::fmt;
use std::sync::Arc;

use super::{DiffusionModel, ModelKind, StepWorkspace};
use crate::error::{Error, Result};

/// `(t, x, input, out)`
pub type ApplyFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, out)`
pub type FieldFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, u, input, out)`
pub type ApplyDerivFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, u, v, input, out)`
pub type ApplySecondFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Diffusion on flat space built from closures. See [`FlatModelBuilder`].
#[derive(Clone)]
pub struct FlatModel {
    n: usize,
    m: usize,
    diffusion: ApplyFn,
    drift: FieldFn,
    diffusion_derivative: Option<ApplyDerivFn>,
    drift_derivative: Option<ApplyDerivFn>,
    diffusion_second: Option<ApplySecondFn>,
    drift_second: Option<ApplySecondFn>,
    right_inverse: Option<ApplyFn>,
    right_inverse_derivative: Option<ApplyDerivFn>,
    gradient_system: bool,
    finite_difference: bool,
}

impl fmt::Debug for FlatModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlatModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("finite_difference", &self.finite_difference)
            .finish_non_exhaustive()
    }
}

pub struct FlatModelBuilder {
    n: usize,
    m: usize,
    diffusion: ApplyFn,
    drift: FieldFn,
    diffusion_derivative: Option<ApplyDerivFn>,
    drift_derivative: Option<ApplyDerivFn>,
    diffusion_second: Option<ApplySecondFn>,
    drift_second: Option<ApplySecondFn>,
    right_inverse: Option<ApplyFn>,
    right_inverse_derivative: Option<ApplyDerivFn>,
    gradient_system: bool,
    fd_step: Option<f64>,
}

impl FlatModel {
    /// Starts a model `dx = X(x) dB + Z(x) dt` with `n` state and `m` noise
    /// dimensions. `diffusion(t, x, db, out)` writes `X(x) db`;
    /// `drift(t, x, out)` writes the Itô drift `Z(x)`.
    pub fn builder<D, Z>(n: usize, m: usize, diffusion: D, drift: Z) -> FlatModelBuilder
    where
        D: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        Z: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        FlatModelBuilder {
            n,
            m,
            diffusion: Arc::new(diffusion),
            drift: Arc::new(drift),
            diffusion_derivative: None,
            drift_derivative: None,
            diffusion_second: None,
            drift_second: None,
            right_inverse: None,
            right_inverse_derivative: None,
            gradient_system: false,
            fd_step: None,
        }
    }
}

impl FlatModelBuilder {
    pub fn diffusion_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.diffusion_derivative = Some(Arc::new(f));
        self
    }

    pub fn drift_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.drift_derivative = Some(Arc::new(move |t, x, u, _unused: &[f64], out: &mut [f64]| f(t, x, u, out)));
        self
    }

    pub fn diffusion_second_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.diffusion_second = Some(Arc::new(f));
        self
    }

    pub fn drift_second_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.drift_second = Some(Arc::new(move |t, x, u, v, _unused: &[f64], out: &mut [f64]| f(t, x, u, v, out)));
        self
    }

    /// Closed-form right inverse `(t, x, v, out_m)`; otherwise the generic
    /// pseudo-inverse is used.
    pub fn right_inverse<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.right_inverse = Some(Arc::new(f));
        self
    }

    /// `(t, x, u, v, out_m)` writes `DY(x)(u)(v)`.
    pub fn right_inverse_derivative<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.right_inverse_derivative = Some(Arc::new(f));
        self
    }

    pub fn gradient_system(mut self, yes: bool) -> Self {
        self.gradient_system = yes;
        self
    }

    /// Fill any missing `DX`, `DZ`, `D²X`, `D²Z`, `DY` by central differences
    /// with step `h`. The model then reports
    /// [`has_finite_difference_derivatives`](DiffusionModel::has_finite_difference_derivatives).
    pub fn finite_difference_fallback(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn build(self) -> Result<FlatModel> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidParameter("model dimensions must be positive".into()));
        }
        let mut model = FlatModel {
            n: self.n,
            m: self.m,
            diffusion: self.diffusion,
            drift: self.drift,
            diffusion_derivative: self.diffusion_derivative,
            drift_derivative: self.drift_derivative,
            diffusion_second: self.diffusion_second,
            drift_second: self.drift_second,
            right_inverse: self.right_inverse,
            right_inverse_derivative: self.right_inverse_derivative,
            gradient_system: self.gradient_system,
            finite_difference: false,
        };
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
            }
            model.fill_finite_differences(h);
        }
        Ok(model)
    }
}

/// Central difference of `f(t, x + s u, ...)` in `s`, written to `out`.
fn central(n: usize, h: f64, x: &[f64], u: &[f64], out: &mut [f64], f: impl Fn(&[f64], &mut [f64])) {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..x.len() {
        xp[i] += h * u[i];
        xm[i] -= h * u[i];
    }
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    f(&xp, &mut fp);
    f(&xm, &mut fm);
    for i in 0..n {
        out[i] = (fp[i] - fm[i]) / (2.0 * h);
    }
}

impl FlatModel {
    fn fill_finite_differences(&mut self, h: f64) {
        let n = self.n;
        let m = self.m;
        let mut used = false;
        if self.diffusion_derivative.is_none() {
            let x_fn = self.diffusion.clone();
            self.diffusion_derivative = Some(Arc::new(move |t, x, u, db, out| {
                central(n, h, x, u, out, |y, o| x_fn(t, y, db, o));
            }));
            used = true;
        }
        if self.drift_derivative.is_none() {
            let z_fn = self.drift.clone();
            self.drift_derivative = Some(Arc::new(move |t, x, u, _unused, out| {
                central(n, h, x, u, out, |y, o| z_fn(t, y, o));
            }));
            used = true;
        }
        if self.diffusion_second.is_none() {
            let dx = self.diffusion_derivative.clone().expect("filled above");
            self.diffusion_second = Some(Arc::new(move |t, x, u, v, db, out| {
                central(n, h, x, v, out, |y, o| dx(t, y, u, db, o));
            }));
            used = true;
        }
        if self.drift_second.is_none() {
            let dz = self.drift_derivative.clone().expect("filled above");
            self.drift_second = Some(Arc::new(move |t, x, u, v, unused, out| {
                central(n, h, x, v, out, |y, o| dz(t, y, u, unused, o));
            }));
            used = true;
        }
        if self.right_inverse_derivative.is_none() {
            let this = self.clone();
            self.right_inverse_derivative = Some(Arc::new(move |t, x, u, v, out| {
                central(m, h, x, u, out, |y, o| {
                    if this.apply_right_inverse(t, y, v, o).is_err() {
                        o.fill(f64::NAN);
                    }
                });
            }));
            used = true;
        }
        self.finite_difference = used;
    }
}

impl DiffusionModel for FlatModel {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn noise_dim(&self) -> usize {
        self.m
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Flat
    }

    fn apply_diffusion(&self, t: f64, x: &[f64], db: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, db, out)
    }

    fn ito_drift(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.drift)(t, x, out);
        Ok(())
    }

    fn stratonovich_drift(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        // A = Z - ½ Σ DX(X^i) e_i
        (self.drift)(t, x, out);
        let dx = self.diffusion_derivative.as_ref().ok_or(Error::MissingDerivative("DX"))?;
        let mut e = vec![0.0; self.m];
        let mut col = vec![0.0; self.n];
        let mut corr = vec![0.0; self.n];
        for i in 0..self.m {
            e.fill(0.0);
            e[i] = 1.0;
            (self.diffusion)(t, x, &e, &mut col);
            dx(t, x, &col, &e, &mut corr);
            for k in 0..self.n {
                out[k] -= 0.5 * corr[k];
            }
        }
        Ok(())
    }

    fn apply_diffusion_derivative(&self, t: f64, x: &[f64], u: &[f64], db: &[f64], out: &mut [f64]) -> Result<()> {
        let f = self.diffusion_derivative.as_ref().ok_or(Error::MissingDerivative("DX"))?;
        f(t, x, u, db, out);
        Ok(())
    }

    fn drift_derivative(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let f = self.drift_derivative.as_ref().ok_or(Error::MissingDerivative("DZ"))?;
        f(t, x, u, &[], out);
        Ok(())
    }

    fn apply_diffusion_second_derivative(
        &self,
        t: f64,
        x: &[f64],
        u: &[f64],
        v: &[f64],
        db: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let f = self.diffusion_second.as_ref().ok_or(Error::MissingDerivative("D2X"))?;
        f(t, x, u, v, db, out);
        Ok(())
    }

    fn drift_second_derivative(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let f = self.drift_second.as_ref().ok_or(Error::MissingDerivative("D2Z"))?;
        f(t, x, u, v, &[], out);
        Ok(())
    }

    fn apply_right_inverse(&self, t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.right_inverse {
            Some(f) => {
                f(t, x, v, out);
                Ok(())
            }
            None => super::right_inverse_apply(self, t, x, v, out),
        }
    }

    fn apply_right_inverse_derivative(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let f = self.right_inverse_derivative.as_ref().ok_or(Error::MissingDerivative("DY"))?;
        f(t, x, u, v, out);
        Ok(())
    }

    fn is_gradient_system(&self) -> bool {
        self.gradient_system
    }

    fn has_finite_difference_derivatives(&self) -> bool {
        self.finite_difference
    }
}

fn zero2(_t: f64, _x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) {
    out.fill(0.0);
}

fn zero3(_t: f64, _x: &[f64], _u: &[f64], _v: &[f64], _db: &[f64], out: &mut [f64]) {
    out.fill(0.0);
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Drift {
    Zero,
    Linear(f64),
    Power { c: f64, p: i32 },
}

/// `dx = dB + Z(x) dt` on `R^n` with identity noise and a componentwise
/// drift; covers Brownian motion, Ornstein–Uhlenbeck, linear growth and
/// power-law drifts.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveNoiseModel {
    n: usize,
    drift: Drift,
}

impl AdditiveNoiseModel {
    fn new(n: usize, drift: Drift) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self { n, drift })
    }

    #[inline]
    fn z(&self, x: f64) -> f64 {
        match self.drift {
            Drift::Zero => 0.0,
            Drift::Linear(r) => r * x,
            Drift::Power { c, p } => c * x.powi(p),
        }
    }

    #[inline]
    fn dz(&self, x: f64, u: f64) -> f64 {
        match self.drift {
            Drift::Zero => 0.0,
            Drift::Linear(r) => r * u,
            Drift::Power { c, p } => c * p as f64 * x.powi(p - 1) * u,
        }
    }

    #[inline]
    fn d2z(&self, x: f64, u: f64, v: f64) -> f64 {
        match self.drift {
            Drift::Zero | Drift::Linear(_) => 0.0,
            Drift::Power { c, p } => c * (p * (p - 1)) as f64 * x.powi(p - 2) * u * v,
        }
    }
}

impl DiffusionModel for AdditiveNoiseModel {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn noise_dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Flat
    }

    fn apply_diffusion(&self, _t: f64, _x: &[f64], db: &[f64], out: &mut [f64]) {
        out.copy_from_slice(db);
    }

    fn stratonovich_drift(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.ito_drift(t, x, out)
    }

    fn ito_drift(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.z(*xi);
        }
        Ok(())
    }

    fn apply_diffusion_derivative(&self, _t: f64, _x: &[f64], _u: &[f64], _db: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn drift_derivative(&self, _t: f64, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..self.n {
            out[i] = self.dz(x[i], u[i]);
        }
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

    fn drift_second_derivative(&self, _t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..self.n {
            out[i] = self.d2z(x[i], u[i], v[i]);
        }
        Ok(())
    }

    fn apply_right_inverse(&self, _t: f64, _x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(v);
        Ok(())
    }

    fn apply_right_inverse_derivative(&self, _t: f64, _x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn is_gradient_system(&self) -> bool {
        true
    }

    fn step(&self, _t: f64, dt: f64, x: &[f64], db: &[f64], out: &mut [f64], _ws: &mut StepWorkspace) -> Result<()> {
        for i in 0..self.n {
            out[i] = x[i] + db[i] + self.z(x[i]) * dt;
        }
        Ok(())
    }

    fn step_tangent(
        &self,
        _t: f64,
        dt: f64,
        x: &[f64],
        _db: &[f64],
        v: &[f64],
        out: &mut [f64],
        _ws: &mut StepWorkspace,
    ) -> Result<()> {
        for i in 0..self.n {
            out[i] = v[i] + self.dz(x[i], v[i]) * dt;
        }
        Ok(())
    }
}

/// Standard Brownian motion on `R^n`.
pub fn brownian(n: usize) -> Result<AdditiveNoiseModel> {
    AdditiveNoiseModel::new(n, Drift::Zero)
}

/// Linear-drift model `dx = dB + r x dt` on `R^n`; `r = -θ` gives the
/// Ornstein–Uhlenbeck process, `r > 0` linear growth.
pub fn linear_drift(n: usize, rate: f64) -> Result<AdditiveNoiseModel> {
    if !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate must be finite, got {rate}")));
    }
    AdditiveNoiseModel::new(n, Drift::Linear(rate))
}

/// `dx = dB - θ x dt`
pub fn ornstein_uhlenbeck(n: usize, theta: f64) -> Result<AdditiveNoiseModel> {
    linear_drift(n, -theta)
}

/// One-dimensional `dx = dB + c x^p dt` for integer `p >= 2`; the drift grows
/// super-linearly and paths can explode in finite time.
pub fn power_drift(coefficient: f64, power: u32) -> Result<AdditiveNoiseModel> {
    if power < 2 || !coefficient.is_finite() {
        return Err(Error::InvalidParameter(format!("power drift needs p >= 2 and finite coefficient, got p = {power}")));
    }
    AdditiveNoiseModel::new(
        1,
        Drift::Power {
            c: coefficient,
            p: power as i32,
        },
    )
}

/// Geometric Brownian motion `dx = σ x dB + μ x dt` in one dimension.
pub fn geometric_brownian(sigma: f64, mu: f64) -> Result<FlatModel> {
    if !(sigma > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter("geometric Brownian motion needs sigma > 0".into()));
    }
    FlatModel::builder(1, 1, move |_t, x, db, out| out[0] = sigma * x[0] * db[0], move |_t, x, out| out[0] = mu * x[0])
        .diffusion_derivative(move |_t, _x, u, db, out| out[0] = sigma * u[0] * db[0])
        .drift_derivative(move |_t, _x, u, out| out[0] = mu * u[0])
        .diffusion_second_derivative(zero3)
        .drift_second_derivative(zero2)
        .right_inverse(move |_t, x, v, out| out[0] = v[0] / (sigma * x[0]))
        .right_inverse_derivative(move |_t, x, u, v, out| out[0] = -v[0] * u[0] / (sigma * x[0] * x[0]))
        .build()
}

/// `dx = (1 + ε sin x) dB` in one dimension: elliptic, bounded, with
/// non-vanishing derivatives of every order.
pub fn sine_modulated(epsilon: f64) -> Result<FlatModel> {
    if !(epsilon.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("|epsilon| must be < 1, got {epsilon}")));
    }
    let e = epsilon;
    FlatModel::builder(1, 1, move |_t, x, db, out| out[0] = (1.0 + e * x[0].sin()) * db[0], |_t, _x, out| out[0] = 0.0)
        .diffusion_derivative(move |_t, x, u, db, out| out[0] = e * x[0].cos() * u[0] * db[0])
        .drift_derivative(|_t, _x, _u, out| out[0] = 0.0)
        .diffusion_second_derivative(move |_t, x, u, v, db, out| out[0] = -e * x[0].sin() * u[0] * v[0] * db[0])
        .drift_second_derivative(zero2)
        .right_inverse(move |_t, x, v, out| out[0] = v[0] / (1.0 + e * x[0].sin()))
        .right_inverse_derivative(move |_t, x, u, v, out| {
            let s = 1.0 + e * x[0].sin();
            out[0] = -e * x[0].cos() * u[0] * v[0] / (s * s);
        })
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finite_difference_fallback_matches_closed_form() {
        let e = 0.3;
        let exact = sine_modulated(e).unwrap();
        let fd = FlatModel::builder(1, 1, move |_t, x, db, out| out[0] = (1.0 + e * x[0].sin()) * db[0], |_t, _x, out| out[0] = 0.0)
            .right_inverse(move |_t, x, v, out| out[0] = v[0] / (1.0 + e * x[0].sin()))
            .finite_difference_fallback(1e-5)
            .build()
            .unwrap();
        assert!(fd.has_finite_difference_derivatives());
        assert!(!exact.has_finite_difference_derivatives());
        let x = [0.7];
        let (mut a, mut b) = ([0.0], [0.0]);
        exact.apply_diffusion_derivative(0.0, &x, &[1.3], &[0.4], &mut a).unwrap();
        fd.apply_diffusion_derivative(0.0, &x, &[1.3], &[0.4], &mut b).unwrap();
        assert_relative_eq!(a[0], b[0], epsilon = 1e-9);
        exact.apply_diffusion_second_derivative(0.0, &x, &[1.3], &[-0.6], &[0.4], &mut a).unwrap();
        fd.apply_diffusion_second_derivative(0.0, &x, &[1.3], &[-0.6], &[0.4], &mut b).unwrap();
        assert_relative_eq!(a[0], b[0], epsilon = 1e-5);
        exact.apply_right_inverse_derivative(0.0, &x, &[1.3], &[0.5], &mut a).unwrap();
        fd.apply_right_inverse_derivative(0.0, &x, &[1.3], &[0.5], &mut b).unwrap();
        assert_relative_eq!(a[0], b[0], epsilon = 1e-8);
    }

    #[test]
    fn generic_right_inverse_matches_closed_form() {
        let m = geometric_brownian(0.5, 0.1).unwrap();
        let x = [2.0];
        let mut generic = [0.0];
        crate::models::right_inverse_apply(&m, 0.0, &x, &[3.0], &mut generic).unwrap();
        assert_relative_eq!(generic[0], 3.0, epsilon = 1e-14);
        let mut closed = [0.0];
        m.apply_right_inverse(0.0, &x, &[3.0], &mut closed).unwrap();
        assert_relative_eq!(generic[0], closed[0], epsilon = 1e-14);
    }

    #[test]
    fn degenerate_diffusion_is_rejected() {
        let m = FlatModel::builder(2, 1, |_t, _x, db, out| {
            out[0] = db[0];
            out[1] = db[0];
        }, |_t, _x, out| out.fill(0.0))
        .build()
        .unwrap();
        let mut out = [0.0];
        assert_eq!(m.apply_right_inverse(0.0, &[0.0, 0.0], &[1.0, 0.0], &mut out), Err(Error::Degenerate));
    }

    #[test]
    fn missing_derivative_is_reported() {
        let m = FlatModel::builder(1, 1, |_t, _x, db, out| out[0] = db[0], |_t, _x, out| out[0] = 0.0)
            .build()
            .unwrap();
        let mut out = [0.0];
        assert_eq!(
            m.apply_diffusion_derivative(0.0, &[0.0], &[1.0], &[1.0], &mut out),
            Err(Error::MissingDerivative("DX"))
        );
    }
}
