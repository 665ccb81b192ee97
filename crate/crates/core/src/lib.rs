//! Monte Carlo estimators for derivatives of diffusion semigroups.
//!
//! The crate simulates SDEs `dx = X(x) dB + Z(x) dt` on flat space, spheres
//! and SO(3), co-evolves their variation flows, and turns stochastic-integral
//! representation formulas into estimators of `P_t f`, `d(P_t f)`,
//! `∇d(P_t f)`, log-kernel gradients and heat semigroups on forms.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod forms;
pub mod linalg;
pub mod models;
pub mod paths;
pub mod registry;
pub mod variation;

pub use error::{Error, Result};
pub use models::flat::{AdditiveNoiseModel, FlatModel, FlatModelBuilder};
pub use models::observable::{ConstantPotential, FnObservable, FnPotential, Observable, Potential, StandardObservable};
pub use models::sphere::{GradientSphere, UnitSphere};
pub use models::{DiffusionModel, LieGroupModel, ManifoldGeometry, ModelKind, So3Geometry};
pub use paths::{generate_noise, integrate_ito, integrate_stratonovich, Clock, NoisePath, TimeGrid, Trajectory};
pub use forms::{AlternatingTensor, AngleForm, ExactForm, FnForm, FormField, FunctionForm, VolumeForm, ZeroForm};
pub use estimators::{ConditionalBinSpec, EstimatorResult, HessianVariant, Kernel, MonteCarlo};
