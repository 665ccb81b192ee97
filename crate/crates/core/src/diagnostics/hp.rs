use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::models::DiffusionModel;

/// Default number of points in a sampling cloud.
pub const DEFAULT_CLOUD_POINTS: usize = 256;

/// Which printed variant of the moment functional `H_p` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HpForm {
    /// `2<DZ v, v> + Σ|DX^i v|² + (p-2) Σ <DX^i v, v>²/|v|²` with the Itô drift.
    RnIto,
    /// `-Ric(v, v) + 2<∇Z v, v> + Σ|∇X^i v|² + (p-2) Σ <∇X^i v, v>²/|v|²`
    /// with the generator drift.
    Manifold,
    /// Flat `H_2` with a unit coefficient on the last sum; equals `RnIto` at `p = 3`.
    FlatH2,
    /// Covariant `H_2` with a unit coefficient on the last sum.
    CovariantH2,
}

impl HpForm {
    /// `RnIto` on flat models, `Manifold` otherwise.
    pub fn default_for(model: &dyn DiffusionModel) -> Self {
        if model.geometry().is_some() {
            Self::Manifold
        } else {
            Self::RnIto
        }
    }

    fn covariant(self) -> bool {
        matches!(self, Self::Manifold | Self::CovariantH2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HpSample {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    /// `H_p(x)(v, v) / |v|²`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HpReport {
    pub p: f64,
    pub samples: Vec<HpSample>,
    pub sup_estimate: f64,
    pub form_used: HpForm,
}

/// The four building blocks shared by every printed variant.
struct HpTerms {
    ricci: f64,
    drift: f64,
    sum_sq: f64,
    sum_inner_sq: f64,
}

fn hp_terms(model: &dyn DiffusionModel, x: &[f64], v: &[f64], covariant: bool) -> Result<HpTerms> {
    let n = model.ambient_dim();
    let geometry = if covariant { model.geometry() } else { None };
    let mut e = vec![0.0; model.noise_dim()];
    let mut dxv = vec![0.0; n];
    let mut proj = vec![0.0; n];
    let (mut sum_sq, mut sum_inner_sq) = (0.0, 0.0);
    for i in 0..model.noise_dim() {
        e.fill(0.0);
        e[i] = 1.0;
        model.apply_diffusion_derivative(0.0, x, v, &e, &mut dxv)?;
        let w = match geometry {
            Some(g) => {
                g.project_tangent(x, &dxv, &mut proj);
                &proj
            }
            None => &dxv,
        };
        sum_sq += dot(w, w);
        let inner = dot(w, v);
        sum_inner_sq += inner * inner;
    }
    let mut dz = vec![0.0; n];
    if covariant {
        model.generator_drift_derivative(0.0, x, v, &mut dz)?;
    } else {
        model.drift_derivative(0.0, x, v, &mut dz)?;
    }
    Ok(HpTerms {
        ricci: geometry.map_or(0.0, |g| g.ricci(x, v, v)),
        drift: dot(&dz, v),
        sum_sq,
        sum_inner_sq,
    })
}

/// `H_p(x)(v, v) / |v|²` in the selected form. `p` is ignored by the two
/// `H_2` variants.
pub fn evaluate_hp(model: &dyn DiffusionModel, p: f64, x: &[f64], v: &[f64], form: HpForm) -> Result<f64> {
    let v2 = dot(v, v);
    if v2 == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let terms = hp_terms(model, x, v, form.covariant())?;
    let coefficient = match form {
        HpForm::RnIto | HpForm::Manifold => p - 2.0,
        HpForm::FlatH2 | HpForm::CovariantH2 => 1.0,
    };
    let value = -terms.ricci + 2.0 * terms.drift + terms.sum_sq + coefficient * terms.sum_inner_sq / v2;
    Ok(value / v2)
}

/// Evaluates `H_p` over a cloud of `(point, direction)` pairs in parallel.
pub fn hp_report(model: &dyn DiffusionModel, p: f64, form: HpForm, cloud: &[(Vec<f64>, Vec<f64>)]) -> Result<HpReport> {
    let values: Vec<f64> = cloud
        .par_iter()
        .map(|(x, v)| evaluate_hp(model, p, x, v, form))
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(cloud.len());
    let mut sup = f64::NEG_INFINITY;
    for ((x, v), value) in cloud.iter().zip(values) {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("H_p is not finite at {x:?}")));
        }
        sup = sup.max(value);
        samples.push(HpSample {
            point: x.clone(),
            direction: v.clone(),
            value,
        });
    }
    Ok(HpReport {
        p,
        samples,
        sup_estimate: sup,
        form_used: form,
    })
}

/// Pseudo-random `(point, unit tangent)` pairs around `center`: a box of
/// half-width `spread` on flat models, geodesic balls of radius `spread`
/// on manifolds.
pub fn sample_cloud(model: &dyn DiffusionModel, center: &[f64], n_points: usize, spread: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = model.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let mut cloud = Vec::with_capacity(n_points);
    while cloud.len() < n_points {
        let (point, mut dir) = match model.geometry() {
            None => {
                let x: Vec<f64> = center.iter().map(|c| c + rng.random_range(-spread..=spread)).collect();
                (x, gaussian(&mut rng))
            }
            Some(g) => {
                let mut v = vec![0.0; n];
                g.project_tangent(center, &gaussian(&mut rng), &mut v);
                let len = norm(&v);
                if len == 0.0 {
                    continue;
                }
                let radius = rng.random_range(0.0..=spread);
                v.iter_mut().for_each(|c| *c *= radius / len);
                let mut x = vec![0.0; n];
                g.geodesic(center, &v, 1.0, &mut x);
                let mut d = vec![0.0; n];
                g.project_tangent(&x, &gaussian(&mut rng), &mut d);
                (x, d)
            }
        };
        let len = norm(&dir);
        if len == 0.0 {
            continue;
        }
        dir.iter_mut().for_each(|c| *c /= len);
        cloud.push((point, dir));
    }
    cloud
}
