//! Differential forms along diffusion paths: line integrals of forms and
//! Monte Carlo estimators of heat semigroups acting on 1- and 2-forms.
//!
//! Forms are evaluated extrinsically on ambient tangent vectors. Wedge
//! products are formed in the coordinates of the input vectors themselves.

mod builtin;
mod integrals;
mod tensor;

use crate::error::{Error, Result};
use crate::models::DiffusionModel;

pub use builtin::{AngleForm, ExactForm, FnForm, FunctionForm, VolumeForm, ZeroForm};
pub use integrals::{line_integral_one_form, q_form_line_integral};
pub use tensor::{AlternatingTensor, MAX_TENSOR_RANK};

/// Largest form degree accepted by the estimators.
pub const MAX_FORM_DEGREE: usize = 2;

/// A smooth `q`-form on the state space.
pub trait FormField: Send + Sync {
    fn degree(&self) -> usize;

    /// Ambient dimension the form is written for, if fixed.
    fn ambient_dim(&self) -> Option<usize> {
        None
    }

    /// `φ_x(v_1, .., v_q)` for tangent vectors at `x`.
    fn eval(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64>;

    /// `(δ^h φ)_x(v_1, .., v_{q-1})`, where `h` is the potential of the
    /// model's drift.
    fn codifferential(&self, _model: &dyn DiffusionModel, _x: &[f64], _vectors: &[&[f64]]) -> Result<f64> {
        Err(Error::MissingCodifferential)
    }

    fn is_closed(&self) -> bool;

    fn sup_norm(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn check_form_dim(model: &dyn DiffusionModel, form: &dyn FormField) -> Result<()> {
    match form.ambient_dim() {
        Some(d) if d != model.ambient_dim() => Err(Error::DimensionMismatch {
            what: "form ambient dimension",
            expected: model.ambient_dim(),
            got: d,
        }),
        _ => Ok(()),
    }
}
