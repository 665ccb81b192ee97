//! Built-in scenarios addressable by string id, with their observables,
//! forms and closed-form reference values.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::forms::{AngleForm, ExactForm, FormField, VolumeForm, ZeroForm};
use crate::models::flat::{brownian, ornstein_uhlenbeck};
use crate::models::lie::{exp, write_matrix};
use crate::models::observable::{Observable, StandardObservable};
use crate::models::sphere::GradientSphere;
use crate::models::{DiffusionModel, LieGroupModel};

/// Quantity a reference value refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// `P_t f(x0)`
    Value,
    /// `d(P_t f)(v0)`
    Gradient,
    /// `∇d(P_t f)(u0, v0)`
    Hessian,
    /// `d` of `E f(x_t) exp(c t)` along `v0` for a constant potential `c`.
    PotentialGradient { potential: f64 },
    /// `d_x log p_t(x0, y)(v0)`
    Score,
    /// Form semigroup applied to `(v0)` or `(v0, u0)`.
    Form,
}

/// Arguments of a reference-value lookup.
#[derive(Debug, Clone, Copy)]
pub struct OracleQuery<'a> {
    pub quantity: Quantity,
    /// Observable id, or form id for [`Quantity::Form`].
    pub id: &'a str,
    pub t: f64,
    pub x0: &'a [f64],
    pub v0: &'a [f64],
    pub u0: &'a [f64],
    /// Conditioning point for [`Quantity::Score`].
    pub target: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Bm1d,
    Bm2d,
    Circle,
    Ou1d,
    So3,
    Sphere3,
}

/// A standard observable with the bound it satisfies on its scenario's
/// state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioObservable {
    pub inner: StandardObservable,
    sup: Option<f64>,
}

impl Observable for ScenarioObservable {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.gradient(x, out)
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.hessian(x, out)
    }

    fn sup_norm(&self) -> Option<f64> {
        self.sup.or_else(|| self.inner.sup_norm())
    }
}

/// A named model together with a default starting point and directions.
#[derive(Clone)]
pub struct Scenario {
    kind: Kind,
    pub id: &'static str,
    pub description: &'static str,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub u0: Vec<f64>,
    /// Lie algebra coordinates of `v0` on group scenarios.
    pub lie_direction: Option<Vec<f64>>,
    /// Observable used when a config names none.
    pub default_observable: &'static str,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario").field("id", &self.id).field("x0", &self.x0).finish()
    }
}

const SO3_ANGLE: f64 = PI / 3.0;

fn so3_start() -> Vec<f64> {
    let mut g = vec![0.0; 9];
    write_matrix(&exp(&[0.0, 0.0, SO3_ANGLE * std::f64::consts::SQRT_2]), &mut g);
    g
}

fn so3_direction(g: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 9];
    LieGroupModel::so3(1.0).expect("unit noise").left_translate(g, xi, &mut v);
    v
}

fn build(kind: Kind) -> Scenario {
    match kind {
        Kind::Bm1d => Scenario {
            kind,
            id: "bm1d",
            description: "standard Brownian motion on R",
            x0: vec![0.0],
            v0: vec![1.0],
            u0: vec![1.0],
            lie_direction: None,
            default_observable: "sin",
        },
        Kind::Bm2d => Scenario {
            kind,
            id: "bm2d",
            description: "standard Brownian motion on R^2",
            x0: vec![0.0, 0.0],
            v0: vec![1.0, 0.0],
            u0: vec![0.0, 1.0],
            lie_direction: None,
            default_observable: "sin",
        },
        Kind::Circle => Scenario {
            kind,
            id: "circle",
            description: "Brownian motion on the unit circle in R^2 (gradient system)",
            x0: vec![1.0, 0.0],
            v0: vec![0.0, 1.0],
            u0: vec![0.0, 1.0],
            lie_direction: None,
            default_observable: "sin",
        },
        Kind::Ou1d => Scenario {
            kind,
            id: "ou1d",
            description: "Ornstein-Uhlenbeck dx = dB - x dt on R",
            x0: vec![0.0],
            v0: vec![1.0],
            u0: vec![1.0],
            lie_direction: None,
            default_observable: "sin",
        },
        Kind::So3 => {
            let x0 = so3_start();
            let xi = vec![0.0, 0.0, 1.0];
            Scenario {
                kind,
                id: "so3",
                description: "left-invariant Brownian motion on SO(3), unit noise",
                v0: so3_direction(&x0, &xi),
                u0: so3_direction(&x0, &[1.0, 0.0, 0.0]),
                x0,
                lie_direction: Some(xi),
                default_observable: "trace",
            }
        }
        Kind::Sphere3 => Scenario {
            kind,
            id: "sphere3",
            description: "Brownian motion on the unit sphere S^2 in R^3 (gradient system)",
            x0: vec![0.0, 0.0, 1.0],
            v0: vec![1.0, 0.0, 0.0],
            u0: vec![0.0, 1.0, 0.0],
            lie_direction: None,
            default_observable: "height",
        },
    }
}

const ALL: [Kind; 6] = [Kind::Bm1d, Kind::Bm2d, Kind::Circle, Kind::Ou1d, Kind::So3, Kind::Sphere3];

/// Every built-in scenario, sorted by id.
pub fn scenarios() -> Vec<Scenario> {
    ALL.iter().map(|&k| build(k)).collect()
}

/// Looks up a scenario by id.
pub fn scenario(id: &str) -> Option<Scenario> {
    ALL.iter().map(|&k| build(k)).find(|s| s.id == id)
}

/// Linear observables on the sphere scenarios: `(id, ambient coordinate)`.
fn sphere_coordinates(kind: Kind) -> &'static [(&'static str, usize)] {
    match kind {
        Kind::Circle => &[("cos", 0), ("sin", 1), ("x", 0), ("y", 1)],
        Kind::Sphere3 => &[("height", 2), ("x", 0), ("y", 1), ("z", 2)],
        _ => &[],
    }
}

impl Scenario {
    /// Fresh instance of the model.
    pub fn model(&self) -> Box<dyn DiffusionModel> {
        match self.kind {
            Kind::Bm1d => Box::new(brownian(1).expect("valid dimension")),
            Kind::Bm2d => Box::new(brownian(2).expect("valid dimension")),
            Kind::Ou1d => Box::new(ornstein_uhlenbeck(1, 1.0).expect("valid rate")),
            Kind::Circle => Box::new(GradientSphere::new(2).expect("valid dimension")),
            Kind::Sphere3 => Box::new(GradientSphere::new(3).expect("valid dimension")),
            Kind::So3 => Box::new(LieGroupModel::so3(1.0).expect("unit noise")),
        }
    }

    fn is_flat(&self) -> bool {
        matches!(self.kind, Kind::Bm1d | Kind::Bm2d | Kind::Ou1d)
    }

    /// Observable ids understood by this scenario, sorted.
    pub fn observable_ids(&self) -> Vec<&'static str> {
        let mut ids: Vec<&'static str> = match self.kind {
            Kind::Bm1d | Kind::Bm2d | Kind::Ou1d => vec!["cos", "one", "sign", "sin", "x", "x2"],
            Kind::Circle | Kind::Sphere3 => {
                let mut v: Vec<_> = sphere_coordinates(self.kind).iter().map(|(id, _)| *id).collect();
                v.push("one");
                v
            }
            Kind::So3 => vec!["entry", "one", "trace"],
        };
        ids.sort_unstable();
        ids
    }

    /// Observable with the given id. Flat observables act on the first
    /// coordinate; bounds on compact scenarios are attached.
    pub fn observable(&self, id: &str) -> Option<ScenarioObservable> {
        let (inner, sup) = match (self.kind, id) {
            (_, "one") => (StandardObservable::Constant(1.0), None),
            (Kind::Bm1d | Kind::Bm2d | Kind::Ou1d, _) => match id {
                "sin" => (StandardObservable::Sin(0), None),
                "cos" => (StandardObservable::Cos(0), None),
                "x" => (StandardObservable::Coordinate(0), None),
                "x2" => (StandardObservable::Square(0), None),
                "sign" => (StandardObservable::Sign(0), None),
                _ => return None,
            },
            (Kind::Circle | Kind::Sphere3, _) => {
                let &(_, i) = sphere_coordinates(self.kind).iter().find(|(name, _)| *name == id)?;
                (StandardObservable::Coordinate(i), Some(1.0))
            }
            (Kind::So3, "trace") => (StandardObservable::Trace, Some(3.0)),
            (Kind::So3, "entry") => (StandardObservable::MatrixEntry(0, 1), Some(1.0)),
            (Kind::So3, _) => return None,
        };
        Some(ScenarioObservable { inner, sup })
    }

    /// Form ids understood by this scenario, sorted.
    pub fn form_ids(&self) -> Vec<String> {
        let mut ids = vec!["zero1".to_string()];
        match self.kind {
            Kind::Circle => ids.push("dtheta_s1".into()),
            Kind::Sphere3 => ids.extend(["vol_s2".to_string(), "zero2".to_string()]),
            Kind::Bm2d => ids.push("zero2".into()),
            _ => {}
        }
        ids.extend(
            self.observable_ids()
                .into_iter()
                .filter(|&f| f != "sign")
                .map(|f| format!("exact:{f}")),
        );
        ids.sort_unstable();
        ids
    }

    /// Form with the given id: `dtheta_s1`, `vol_s2`, `zero1`, `zero2`, or
    /// `exact:<observable id>`.
    pub fn form(&self, id: &str) -> Option<Box<dyn FormField>> {
        if !self.form_ids().iter().any(|f| f == id) {
            return None;
        }
        match id {
            "dtheta_s1" => Some(Box::new(AngleForm)),
            "vol_s2" => Some(Box::new(VolumeForm)),
            "zero1" => Some(Box::new(ZeroForm(1))),
            "zero2" => Some(Box::new(ZeroForm(2))),
            _ => {
                let f = self.observable(id.strip_prefix("exact:")?)?;
                Some(Box::new(ExactForm::from_arc(Arc::new(f) as Arc<dyn Observable>)))
            }
        }
    }

    /// One-line summary of the available reference values.
    pub fn oracle_summary(&self) -> String {
        let quantities = match self.kind {
            Kind::Bm1d | Kind::Ou1d => "value, gradient, hessian, potential, score, exact forms",
            Kind::Bm2d => "value, gradient, hessian, potential, exact forms",
            Kind::Circle => "value, gradient, dtheta_s1, exact forms",
            Kind::Sphere3 => "value, gradient, vol_s2, exact forms",
            Kind::So3 => "value, gradient",
        };
        let observables: Vec<_> = self.observable_ids().into_iter().filter(|&f| f != "sign").collect();
        format!("{quantities} [{}]", observables.join(","))
    }

    /// Closed-form reference value, when one is known.
    pub fn oracle(&self, q: &OracleQuery<'_>) -> Option<f64> {
        match q.quantity {
            Quantity::Value | Quantity::Gradient | Quantity::Hessian => self.semigroup_oracle(q.quantity, q.id, q.t, q.x0, q.v0, q.u0),
            Quantity::PotentialGradient { potential } => {
                if !self.is_flat() {
                    return None;
                }
                let g = self.semigroup_oracle(Quantity::Gradient, q.id, q.t, q.x0, q.v0, q.u0)?;
                Some((potential * q.t).exp() * g)
            }
            Quantity::Score => {
                let (x, y, v) = (*q.x0.first()?, *q.target.first()?, *q.v0.first()?);
                match self.kind {
                    Kind::Bm1d => Some((y - x) / q.t * v),
                    Kind::Ou1d => {
                        let a = (-q.t).exp();
                        let s2 = 0.5 * (1.0 - a * a);
                        Some(a * (y - x * a) / s2 * v)
                    }
                    _ => None,
                }
            }
            Quantity::Form => self.form_oracle(q),
        }
    }

    fn form_oracle(&self, q: &OracleQuery<'_>) -> Option<f64> {
        self.form(q.id)?;
        let (x, v, u) = (q.x0, q.v0, q.u0);
        match q.id {
            "zero1" | "zero2" => Some(0.0),
            // harmonic forms are fixed by the semigroup
            "dtheta_s1" => Some(x[0] * v[1] - x[1] * v[0]),
            "vol_s2" => Some(
                x[0] * (v[1] * u[2] - v[2] * u[1]) - x[1] * (v[0] * u[2] - v[2] * u[0]) + x[2] * (v[0] * u[1] - v[1] * u[0]),
            ),
            // exact forms commute with the semigroup
            id => self.semigroup_oracle(Quantity::Gradient, id.strip_prefix("exact:")?, q.t, x, v, u),
        }
    }

    fn semigroup_oracle(&self, quantity: Quantity, id: &str, t: f64, x0: &[f64], v0: &[f64], u0: &[f64]) -> Option<f64> {
        if id == "one" {
            return Some(if quantity == Quantity::Value { 1.0 } else { 0.0 });
        }
        let f = self.observable(id)?;
        match self.kind {
            Kind::Bm1d | Kind::Bm2d | Kind::Ou1d => {
                let (x, v, u) = (*x0.first()?, *v0.first()?, *u0.first()?);
                // x_t = a x + N(0, s2)
                let (a, s2) = if self.kind == Kind::Ou1d {
                    let a = (-t).exp();
                    (a, 0.5 * (1.0 - a * a))
                } else {
                    (1.0, t)
                };
                let m = a * x;
                let damp = (-0.5 * s2).exp();
                let (value, d1, d2) = match id {
                    "sin" => (damp * m.sin(), damp * m.cos(), -damp * m.sin()),
                    "cos" => (damp * m.cos(), -damp * m.sin(), -damp * m.cos()),
                    "x" => (m, 1.0, 0.0),
                    "x2" => (m * m + s2, 2.0 * m, 2.0),
                    _ => return None,
                };
                Some(match quantity {
                    Quantity::Value => value,
                    Quantity::Gradient => a * d1 * v,
                    _ => a * a * d2 * u * v,
                })
            }
            Kind::Circle | Kind::Sphere3 | Kind::So3 => {
                // linear observables are eigenfunctions of the generator
                let rate = match self.kind {
                    Kind::Circle => 0.5,
                    Kind::Sphere3 => 1.0,
                    _ => 0.5,
                };
                let decay = (-rate * t).exp();
                match quantity {
                    Quantity::Value => Some(decay * f.value(x0)),
                    Quantity::Gradient => Some(decay * f.value(v0)),
                    _ => None,
                }
            }
        }
    }
}
