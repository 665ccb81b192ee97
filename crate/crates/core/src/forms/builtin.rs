use std::fmt;
use std::sync::Arc;

use super::FormField;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::models::observable::Observable;
use crate::models::DiffusionModel;

/// `∇h` of an h-Brownian system: the Stratonovich drift.
fn grad_h(model: &dyn DiffusionModel, x: &[f64]) -> Result<Vec<f64>> {
    let mut a = vec![0.0; model.ambient_dim()];
    model.stratonovich_drift(0.0, x, &mut a)?;
    Ok(a)
}

/// `L f = <Z, ∇f> + ½ Σ_i D²f(X e_i, X e_i)`, the generator in ambient
/// coordinates (equal to `½ Δ^h f` for an h-Brownian system).
pub(crate) fn generator(model: &dyn DiffusionModel, f: &dyn Observable, x: &[f64]) -> Result<f64> {
    let n = model.ambient_dim();
    let m = model.noise_dim();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut z = vec![0.0; n];
    f.gradient(x, &mut grad)?;
    f.hessian(x, &mut hess)?;
    model.ito_drift(0.0, x, &mut z)?;
    let mut total = dot(&z, &grad);
    let mut e = vec![0.0; m];
    let mut col = vec![0.0; n];
    let mut hcol = vec![0.0; n];
    for i in 0..m {
        e.fill(0.0);
        e[i] = 1.0;
        model.apply_diffusion(0.0, x, &e, &mut col);
        crate::linalg::mat_vec(&hess, n, n, &col, &mut hcol);
        total += 0.5 * dot(&col, &hcol);
    }
    Ok(total)
}

fn expect_vectors(vectors: &[&[f64]], q: usize) -> Result<()> {
    if vectors.len() != q {
        return Err(Error::DegreeMismatch {
            expected: q,
            got: vectors.len(),
        });
    }
    Ok(())
}

/// The zero `q`-form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroForm(pub usize);

impl FormField for ZeroForm {
    fn degree(&self) -> usize {
        self.0
    }

    fn eval(&self, _x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, self.0)?;
        Ok(0.0)
    }

    fn codifferential(&self, _model: &dyn DiffusionModel, _x: &[f64], _vectors: &[&[f64]]) -> Result<f64> {
        Ok(0.0)
    }

    fn is_closed(&self) -> bool {
        true
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `dθ` on the unit circle in `R²`: `dθ_x(v) = x_0 v_1 - x_1 v_0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AngleForm;

impl FormField for AngleForm {
    fn degree(&self) -> usize {
        1
    }

    fn ambient_dim(&self) -> Option<usize> {
        Some(2)
    }

    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 1)?;
        let v = vectors[0];
        Ok(x[0] * v[1] - x[1] * v[0])
    }

    /// Harmonic, so `δ^h dθ = -2 dθ(∇h)`.
    fn codifferential(&self, model: &dyn DiffusionModel, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 0)?;
        let a = grad_h(model, x)?;
        Ok(-2.0 * self.eval(x, &[&a])?)
    }

    fn is_closed(&self) -> bool {
        true
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Riemannian volume form of the unit sphere in `R³`, `vol_x(a, b) = det[x, a, b]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VolumeForm;

impl FormField for VolumeForm {
    fn degree(&self) -> usize {
        2
    }

    fn ambient_dim(&self) -> Option<usize> {
        Some(3)
    }

    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 2)?;
        let (a, b) = (vectors[0], vectors[1]);
        Ok(x[0] * (a[1] * b[2] - a[2] * b[1]) + x[1] * (a[2] * b[0] - a[0] * b[2]) + x[2] * (a[0] * b[1] - a[1] * b[0]))
    }

    /// Harmonic, so `δ^h vol = -2 ι_{∇h} vol`.
    fn codifferential(&self, model: &dyn DiffusionModel, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 1)?;
        let a = grad_h(model, x)?;
        Ok(-2.0 * self.eval(x, &[&a, vectors[0]])?)
    }

    fn is_closed(&self) -> bool {
        true
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// The exact 1-form `df` of an observable with gradient and Hessian.
#[derive(Clone)]
pub struct ExactForm {
    f: Arc<dyn Observable>,
}

impl fmt::Debug for ExactForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactForm")
    }
}

impl ExactForm {
    pub fn new(f: impl Observable + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn from_arc(f: Arc<dyn Observable>) -> Self {
        Self { f }
    }

    pub fn potential(&self) -> &dyn Observable {
        self.f.as_ref()
    }
}

impl FormField for ExactForm {
    fn degree(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 1)?;
        let mut g = vec![0.0; x.len()];
        self.f.gradient(x, &mut g)?;
        Ok(dot(&g, vectors[0]))
    }

    /// `δ^h df = -Δ^h f = -2 L f`.
    fn codifferential(&self, model: &dyn DiffusionModel, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 0)?;
        Ok(-2.0 * generator(model, self.f.as_ref(), x)?)
    }

    fn is_closed(&self) -> bool {
        true
    }
}

/// An observable viewed as a 0-form.
#[derive(Clone)]
pub struct FunctionForm {
    f: Arc<dyn Observable>,
}

impl fmt::Debug for FunctionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FunctionForm")
    }
}

impl FunctionForm {
    pub fn new(f: impl Observable + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn from_arc(f: Arc<dyn Observable>) -> Self {
        Self { f }
    }
}

impl FormField for FunctionForm {
    fn degree(&self) -> usize {
        0
    }

    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, 0)?;
        Ok(self.f.value(x))
    }

    fn is_closed(&self) -> bool {
        false
    }

    fn sup_norm(&self) -> Option<f64> {
        self.f.sup_norm()
    }
}

type EvalFn = dyn Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync;
type CodiffFn = dyn Fn(&dyn DiffusionModel, &[f64], &[&[f64]]) -> Result<f64> + Send + Sync;

/// A form given by closures.
#[derive(Clone)]
pub struct FnForm {
    degree: usize,
    closed: bool,
    ambient_dim: Option<usize>,
    sup: Option<f64>,
    eval: Arc<EvalFn>,
    codiff: Option<Arc<CodiffFn>>,
}

impl fmt::Debug for FnForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnForm")
            .field("degree", &self.degree)
            .field("closed", &self.closed)
            .field("has_codifferential", &self.codiff.is_some())
            .finish()
    }
}

impl FnForm {
    pub fn new(degree: usize, closed: bool, eval: impl Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            degree,
            closed,
            ambient_dim: None,
            sup: None,
            eval: Arc::new(eval),
            codiff: None,
        }
    }

    pub fn with_codifferential(
        mut self,
        codiff: impl Fn(&dyn DiffusionModel, &[f64], &[&[f64]]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.codiff = Some(Arc::new(codiff));
        self
    }

    pub fn with_ambient_dim(mut self, n: usize) -> Self {
        self.ambient_dim = Some(n);
        self
    }

    pub fn with_sup_norm(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }
}

impl FormField for FnForm {
    fn degree(&self) -> usize {
        self.degree
    }

    fn ambient_dim(&self) -> Option<usize> {
        self.ambient_dim
    }

    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, self.degree)?;
        Ok((self.eval)(x, vectors))
    }

    fn codifferential(&self, model: &dyn DiffusionModel, x: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        expect_vectors(vectors, self.degree.saturating_sub(1))?;
        match &self.codiff {
            Some(c) => c(model, x, vectors),
            None => Err(Error::MissingCodifferential),
        }
    }

    fn is_closed(&self) -> bool {
        self.closed
    }

    fn sup_norm(&self) -> Option<f64> {
        self.sup
    }
}
