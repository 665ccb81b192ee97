//! Test functions `f` and Feynman–Kac potentials `V`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A bounded measurable test function with optional derivatives.
pub trait Observable: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Ambient gradient.
    fn gradient(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("gradient of the observable"))
    }

    /// Row-major ambient Hessian.
    fn hessian(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("Hessian of the observable"))
    }

    /// `sup |f|` when known.
    fn sup_norm(&self) -> Option<f64> {
        None
    }
}

/// Ready-made observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardObservable {
    /// `sin(x_i)`
    Sin(usize),
    /// `cos(x_i)`
    Cos(usize),
    /// `x_i`
    Coordinate(usize),
    /// `x_i²`
    Square(usize),
    Constant(f64),
    /// Trace of a row-major 3x3 matrix.
    Trace,
    /// Entry `(r, c)` of a row-major 3x3 matrix.
    MatrixEntry(usize, usize),
    /// `sign(x_i)` with `sign(0) = 0`; bounded but not differentiable.
    Sign(usize),
}

impl Observable for StandardObservable {
    fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Sin(i) => x[i].sin(),
            Self::Cos(i) => x[i].cos(),
            Self::Coordinate(i) => x[i],
            Self::Square(i) => x[i] * x[i],
            Self::Constant(c) => c,
            Self::Trace => x[0] + x[4] + x[8],
            Self::MatrixEntry(r, c) => x[3 * r + c],
            Self::Sign(i) => {
                if x[i] > 0.0 {
                    1.0
                } else if x[i] < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        match *self {
            Self::Sin(i) => out[i] = x[i].cos(),
            Self::Cos(i) => out[i] = -x[i].sin(),
            Self::Coordinate(i) => out[i] = 1.0,
            Self::Square(i) => out[i] = 2.0 * x[i],
            Self::Constant(_) => {}
            Self::Trace => {
                out[0] = 1.0;
                out[4] = 1.0;
                out[8] = 1.0;
            }
            Self::MatrixEntry(r, c) => out[3 * r + c] = 1.0,
            Self::Sign(_) => return Err(Error::MissingDerivative("gradient of sign")),
        }
        Ok(())
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = x.len();
        out.fill(0.0);
        match *self {
            Self::Sin(i) => out[i * n + i] = -x[i].sin(),
            Self::Cos(i) => out[i * n + i] = -x[i].cos(),
            Self::Square(i) => out[i * n + i] = 2.0,
            Self::Coordinate(_) | Self::Constant(_) | Self::Trace | Self::MatrixEntry(..) => {}
            Self::Sign(_) => return Err(Error::MissingDerivative("Hessian of sign")),
        }
        Ok(())
    }

    fn sup_norm(&self) -> Option<f64> {
        match *self {
            Self::Sin(_) | Self::Cos(_) | Self::Sign(_) => Some(1.0),
            Self::Constant(c) => Some(c.abs()),
            Self::Coordinate(_) | Self::Square(_) | Self::Trace | Self::MatrixEntry(..) => None,
        }
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Observable built from closures.
#[derive(Clone)]
pub struct FnObservable {
    value: ValueFn,
    gradient: Option<VectorFn>,
    hessian: Option<VectorFn>,
    sup: Option<f64>,
}

impl fmt::Debug for FnObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObservable")
            .field("has_gradient", &self.gradient.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .field("sup", &self.sup)
            .finish()
    }
}

impl FnObservable {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            hessian: None,
            sup: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_sup_norm(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }
}

impl Observable for FnObservable {
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.gradient.as_ref().ok_or(Error::MissingDerivative("gradient of the observable"))?;
        g(x, out);
        Ok(())
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let h = self.hessian.as_ref().ok_or(Error::MissingDerivative("Hessian of the observable"))?;
        h(x, out);
        Ok(())
    }

    fn sup_norm(&self) -> Option<f64> {
        self.sup
    }
}

/// Feynman–Kac potential `V(t, x)`, bounded above.
pub trait Potential: Send + Sync {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// Spatial gradient.
    fn gradient(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingDerivative("gradient of the potential"))
    }

    /// Declared `sup V`.
    fn upper_bound(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPotential(pub f64);

impl Potential for ConstantPotential {
    fn value(&self, _t: f64, _x: &[f64]) -> f64 {
        self.0
    }

    fn gradient(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn upper_bound(&self) -> f64 {
        self.0
    }
}

type PotentialFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type PotentialGradFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Potential built from closures with a declared upper bound.
#[derive(Clone)]
pub struct FnPotential {
    value: PotentialFn,
    gradient: Option<PotentialGradFn>,
    bound: f64,
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl FnPotential {
    pub fn new(bound: f64, value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            bound,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }
}

impl Potential for FnPotential {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.value)(t, x)
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.gradient.as_ref().ok_or(Error::MissingDerivative("gradient of the potential"))?;
        g(t, x, out);
        Ok(())
    }

    fn upper_bound(&self) -> f64 {
        self.bound
    }
}
