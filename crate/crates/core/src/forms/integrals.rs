use super::{check_form_dim, AlternatingTensor, FormField, MAX_FORM_DEGREE, MAX_TENSOR_RANK};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorResult, MonteCarlo};
use crate::linalg::dot;
use crate::models::DiffusionModel;
use crate::paths::{Clock, NoisePath, Trajectory};
use crate::variation::{evolve_first_variation, VariationPath};

/// `∫ φ∘dx = Σ_k φ(X(x_k) ΔB_k) - ½ Σ_k δ^h φ(x_k) dt` for a 1-form `φ`.
pub fn line_integral_one_form(
    model: &dyn DiffusionModel,
    traj: &Trajectory,
    noise: &NoisePath,
    phi: &dyn FormField,
) -> Result<f64> {
    if phi.degree() != 1 {
        return Err(Error::DegreeMismatch {
            expected: 1,
            got: phi.degree(),
        });
    }
    q_form_line_integral(model, traj, noise, &[], phi)
}

/// The `(q-1)`-form `∫ θ∘dx` evaluated on the variation paths `alpha`:
/// `(1/q) Σ_k θ(X(x_k) ΔB_k, α_k) - ½ Σ_k δ^h θ(α_k) dt`.
pub fn q_form_line_integral(
    model: &dyn DiffusionModel,
    traj: &Trajectory,
    noise: &NoisePath,
    alpha: &[&VariationPath],
    theta: &dyn FormField,
) -> Result<f64> {
    let q = theta.degree();
    if q == 0 || alpha.len() != q - 1 {
        return Err(Error::DegreeMismatch {
            expected: q.max(1) - 1,
            got: alpha.len(),
        });
    }
    if q > MAX_TENSOR_RANK {
        return Err(Error::UnsupportedDegree {
            degree: q,
            dim: model.ambient_dim(),
        });
    }
    check_form_dim(model, theta)?;
    traj.ensure_complete()?;
    for a in alpha {
        if a.len() != traj.len() {
            return Err(Error::DimensionMismatch {
                what: "variation path length",
                expected: traj.len(),
                got: a.len(),
            });
        }
    }
    let dt = traj.grid().dt();
    let mut xdb = vec![0.0; model.ambient_dim()];
    let (mut noise_sum, mut codiff_sum) = (0.0, 0.0);
    for k in 0..traj.len() - 1 {
        let x = traj.state(k);
        model.apply_diffusion(traj.time(k), x, noise.increment(k), &mut xdb);
        let mut args: [&[f64]; MAX_TENSOR_RANK] = [&xdb; MAX_TENSOR_RANK];
        for (j, a) in alpha.iter().enumerate() {
            args[j + 1] = a.vector(k);
        }
        noise_sum += theta.eval(x, &args[..q])?;
        codiff_sum += theta.codifferential(model, x, &args[1..q])?;
    }
    Ok(noise_sum / q as f64 - 0.5 * codiff_sum * dt)
}

/// `Ψ(v^i) = Σ_k <X(x_k) ΔB_k, v^i_k>` for each variation path.
fn psi(model: &dyn DiffusionModel, traj: &Trajectory, noise: &NoisePath, paths: &[VariationPath]) -> Result<Vec<f64>> {
    let mut xdb = vec![0.0; model.ambient_dim()];
    let mut out = vec![0.0; paths.len()];
    for k in 0..traj.len() - 1 {
        model.apply_diffusion(traj.time(k), traj.state(k), noise.increment(k), &mut xdb);
        for (o, p) in out.iter_mut().zip(paths) {
            *o += dot(&xdb, p.vector(k));
        }
    }
    Ok(out)
}

impl MonteCarlo<'_> {
    fn check_form_scope(&self, q: usize, vectors: &[&[f64]]) -> Result<()> {
        let model = self.model();
        if !model.is_gradient_system() {
            return Err(Error::NotGradientSystem);
        }
        let dim = model.geometry().map_or(model.ambient_dim(), |g| g.intrinsic_dim());
        if q == 0 || q > MAX_FORM_DEGREE || dim > MAX_TENSOR_RANK {
            return Err(Error::UnsupportedDegree { degree: q, dim });
        }
        if vectors.len() != q {
            return Err(Error::DegreeMismatch {
                expected: q,
                got: vectors.len(),
            });
        }
        vectors.iter().try_for_each(|v| self.check_tangent(v))
    }

    /// Noise, trajectory and first variations of every input vector.
    fn simulate_frame(&self, path_index: u64, vectors: &[&[f64]]) -> Result<Option<(NoisePath, Trajectory, Vec<VariationPath>)>> {
        let (noise, traj, first) = self.simulate_with_variation(path_index, vectors[0], Clock::Forward)?;
        if traj.blew_up() {
            return Ok(None);
        }
        let mut paths = vec![first];
        for v in &vectors[1..] {
            paths.push(evolve_first_variation(self.model(), &traj, &noise, v)?);
        }
        Ok(Some((noise, traj, paths)))
    }

    /// `(1/t) E Ψ_t(v0) ∫ φ∘dx` for a closed 1-form `φ`; estimates the heat
    /// semigroup on 1-forms applied to `φ` at `v0`.
    pub fn one_form_semigroup(&self, phi: &dyn FormField, v0: &[f64]) -> Result<EstimatorResult> {
        if phi.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                got: phi.degree(),
            });
        }
        self.check_form_scope(1, &[v0])?;
        if !phi.is_closed() {
            return Err(Error::NotClosed);
        }
        check_form_dim(self.model(), phi)?;
        phi.codifferential(self.model(), self.x0(), &[])?;
        let t = self.t();
        self.estimate(|i| {
            let Some((noise, traj, paths)) = self.simulate_frame(i, &[v0])? else {
                return Ok(None);
            };
            let line = line_integral_one_form(self.model(), &traj, &noise, phi)?;
            let weight = psi(self.model(), &traj, &noise, &paths)?[0];
            Ok(Some(weight * line / t))
        })
    }

    /// `(1/t) E (Ψ_t ∧ ∫ θ∘dx)(v^1, .., v^q)` for a closed `q`-form `θ`.
    pub fn q_form_semigroup(&self, theta: &dyn FormField, vectors: &[&[f64]]) -> Result<EstimatorResult> {
        let q = theta.degree();
        self.check_form_scope(q, vectors)?;
        if !theta.is_closed() {
            return Err(Error::NotClosed);
        }
        check_form_dim(self.model(), theta)?;
        let t = self.t();
        let top: Vec<usize> = (0..q).collect();
        self.estimate(|i| {
            let Some((noise, traj, paths)) = self.simulate_frame(i, vectors)? else {
                return Ok(None);
            };
            let weights = AlternatingTensor::from_covector(psi(self.model(), &traj, &noise, &paths)?)?;
            let line = AlternatingTensor::try_from_fn(q, q - 1, |idx| {
                let alpha: Vec<&VariationPath> = idx.iter().map(|&j| &paths[j]).collect();
                q_form_line_integral(self.model(), &traj, &noise, &alpha, theta)
            })?;
            Ok(Some(weights.wedge(&line)?.component(&top) / t))
        })
    }

    /// `d(P_t φ)(v^1, .., v^q) = (1/t) E (Ψ_t ∧ F_t^* φ)(v^1, .., v^q)` for a
    /// `(q-1)`-form `φ`.
    pub fn form_exterior_gradient(&self, phi: &dyn FormField, vectors: &[&[f64]]) -> Result<EstimatorResult> {
        let q = vectors.len();
        if phi.degree() + 1 != q {
            return Err(Error::DegreeMismatch {
                expected: phi.degree() + 1,
                got: q,
            });
        }
        self.check_form_scope(q, vectors)?;
        check_form_dim(self.model(), phi)?;
        let t = self.t();
        let top: Vec<usize> = (0..q).collect();
        self.estimate(|i| {
            let Some((noise, traj, paths)) = self.simulate_frame(i, vectors)? else {
                return Ok(None);
            };
            let weights = AlternatingTensor::from_covector(psi(self.model(), &traj, &noise, &paths)?)?;
            let x_t = traj.terminal();
            let pulled = AlternatingTensor::try_from_fn(q, q - 1, |idx| {
                let args: Vec<&[f64]> = idx.iter().map(|&j| paths[j].terminal()).collect();
                phi.eval(x_t, &args)
            })?;
            Ok(Some(weights.wedge(&pulled)?.component(&top) / t))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{AngleForm, ExactForm, FnForm, FunctionForm, VolumeForm, ZeroForm};
    use crate::models::flat::{brownian, ornstein_uhlenbeck, FlatModel};
    use crate::models::observable::{Observable, StandardObservable};
    use crate::models::sphere::GradientSphere;
    use crate::models::LieGroupModel;
    use crate::paths::{generate_noise, integrate_ito, TimeGrid};
    use approx::assert_relative_eq;

    fn circle_point(th: f64) -> ([f64; 2], [f64; 2]) {
        ([th.cos(), th.sin()], [-th.sin(), th.cos()])
    }

    fn within(r: &EstimatorResult, target: f64, rel: f64) -> bool {
        (r.mean - target).abs() <= (3.0 * r.std_error).max(rel * target.abs().max(1e-300))
    }

    #[test]
    fn exact_form_line_integral_is_endpoint_difference() {
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let dt = grid.dt();
        let cases: Vec<(Box<dyn DiffusionModel>, Vec<f64>, StandardObservable)> = vec![
            (Box::new(brownian(1).unwrap()), vec![0.3], StandardObservable::Sin(0)),
            (Box::new(ornstein_uhlenbeck(1, 1.0).unwrap()), vec![0.5], StandardObservable::Square(0)),
            (Box::new(GradientSphere::new(3).unwrap()), vec![0.0, 0.6, 0.8], StandardObservable::Coordinate(2)),
        ];
        for (model, x0, f) in &cases {
            let df = ExactForm::new(*f);
            let mut bad = 0;
            for p in 0..200 {
                let noise = generate_noise(&grid, 11, p, model.noise_dim());
                let traj = integrate_ito(model.as_ref(), x0, &grid, &noise).unwrap();
                let li = line_integral_one_form(model.as_ref(), &traj, &noise, &df).unwrap();
                let diff = f.value(traj.terminal()) - f.value(traj.initial());
                if (li - diff).abs() > 5.0 * dt.sqrt() * 2.0 {
                    bad += 1;
                }
            }
            assert!(bad <= 2, "{bad} paths outside tolerance");
        }
    }

    #[test]
    fn zero_form_integrates_to_zero() {
        let model = GradientSphere::new(3).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let noise = generate_noise(&grid, 1, 0, 3);
        let traj = integrate_ito(&model, &[1.0, 0.0, 0.0], &grid, &noise).unwrap();
        assert_eq!(line_integral_one_form(&model, &traj, &noise, &ZeroForm(1)).unwrap(), 0.0);
    }

    #[test]
    fn angle_form_measures_winding() {
        let model = GradientSphere::new(2).unwrap();
        let grid = TimeGrid::new(1.0, 2000).unwrap();
        for p in 0..5 {
            let noise = generate_noise(&grid, 5, p, 2);
            let traj = integrate_ito(&model, &[1.0, 0.0], &grid, &noise).unwrap();
            let mut winding = 0.0;
            for k in 0..traj.len() - 1 {
                let (a, b) = (traj.state(k), traj.state(k + 1));
                winding += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
            }
            let li = line_integral_one_form(&model, &traj, &noise, &AngleForm).unwrap();
            assert!((li - winding).abs() < 10.0 * grid.dt(), "{li} vs {winding}");
        }
    }

    #[test]
    fn q_form_line_integral_reduces_for_one_forms() {
        let model = GradientSphere::new(2).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let noise = generate_noise(&grid, 2, 3, 2);
        let traj = integrate_ito(&model, &[0.0, 1.0], &grid, &noise).unwrap();
        let a = line_integral_one_form(&model, &traj, &noise, &AngleForm).unwrap();
        let b = q_form_line_integral(&model, &traj, &noise, &[], &AngleForm).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            q_form_line_integral(&model, &traj, &noise, &[], &VolumeForm),
            Err(Error::DegreeMismatch { expected: 1, got: 0 })
        );
    }

    #[test]
    fn volume_line_integral_matches_frame_oracle() {
        let model = GradientSphere::new(3).unwrap().with_linear_tilt(vec![0.2, 0.0, -0.4]).unwrap();
        let grid = TimeGrid::new(0.5, 100).unwrap();
        let dt = grid.dt();
        let x0 = [0.0, 0.6, 0.8];
        let v0 = [1.0, 0.0, 0.0];
        for p in 0..10 {
            let noise = generate_noise(&grid, 4, p, 3);
            let traj = integrate_ito(&model, &x0, &grid, &noise).unwrap();
            let alpha = evolve_first_variation(&model, &traj, &noise, &v0).unwrap();
            let value = q_form_line_integral(&model, &traj, &noise, &[&alpha], &VolumeForm).unwrap();
            // oracle: components in an oriented frame (e1, e2, x) at each x_k
            let mut expected = 0.0;
            for k in 0..traj.len() - 1 {
                let x = traj.state(k);
                let seed = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                let d = seed.iter().zip(x).map(|(s, y)| s * y).sum::<f64>();
                let mut e1: Vec<f64> = seed.iter().zip(x).map(|(s, y)| s - d * y).collect();
                let n1 = e1.iter().map(|c| c * c).sum::<f64>().sqrt();
                e1.iter_mut().for_each(|c| *c /= n1);
                let e2 = [x[1] * e1[2] - x[2] * e1[1], x[2] * e1[0] - x[0] * e1[2], x[0] * e1[1] - x[1] * e1[0]];
                let coords = |w: &[f64]| {
                    (
                        w.iter().zip(&e1).map(|(a, b)| a * b).sum::<f64>(),
                        w.iter().zip(&e2).map(|(a, b)| a * b).sum::<f64>(),
                    )
                };
                let db = noise.increment(k);
                let xd: f64 = db.iter().zip(x).map(|(a, b)| a * b).sum();
                let pdb: Vec<f64> = db.iter().zip(x).map(|(a, b)| a - xd * b).collect();
                let a = [0.2, 0.0, -0.4];
                let xa: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                let grad_h: Vec<f64> = a.iter().zip(x).map(|(p, q)| p - xa * q).collect();
                let (b1, b2) = coords(&pdb);
                let (u1, u2) = coords(alpha.vector(k));
                let (h1, h2) = coords(&grad_h);
                expected += 0.5 * (b1 * u2 - b2 * u1);
                expected -= 0.5 * (-2.0 * (h1 * u2 - h2 * u1)) * dt;
            }
            assert_relative_eq!(value, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn harmonic_angle_form_is_fixed() {
        let model = GradientSphere::new(2).unwrap();
        let (x0, v0) = circle_point(0.4);
        let mc = MonteCarlo::new(&model, &x0, TimeGrid::new(1.0, 100).unwrap(), 4000, 8).unwrap();
        let r = mc.one_form_semigroup(&AngleForm, &v0).unwrap();
        assert!(within(&r, 1.0, 0.02), "{r:?}");
    }

    #[test]
    fn exact_eigenform_decays() {
        let model = GradientSphere::new(2).unwrap();
        let th0: f64 = 0.4;
        let (x0, v0) = circle_point(th0);
        let mc = MonteCarlo::new(&model, &x0, TimeGrid::new(1.0, 100).unwrap(), 4000, 8).unwrap();
        let df = ExactForm::new(StandardObservable::Coordinate(1));
        let r = mc.one_form_semigroup(&df, &v0).unwrap();
        let target = (-0.5f64).exp() * th0.cos();
        assert!(within(&r, target, 0.02), "{r:?} vs {target}");
        // commutation with the exterior derivative
        let g = mc.form_exterior_gradient(&FunctionForm::new(StandardObservable::Coordinate(1)), &[&v0]).unwrap();
        assert!(g.agrees_with(&r, 3.0), "{g:?} vs {r:?}");
        let zero = mc.one_form_semigroup(&ZeroForm(1), &v0).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn volume_form_is_fixed_on_sphere() {
        let model = GradientSphere::new(3).unwrap();
        let x0 = [0.0, 0.0, 1.0];
        let (u, v) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let mc = MonteCarlo::new(&model, &x0, TimeGrid::new(0.5, 100).unwrap(), 4000, 21).unwrap();
        let r = mc.q_form_semigroup(&VolumeForm, &[&u, &v]).unwrap();
        assert!(within(&r, 1.0, 0.03), "{r:?}");
        let flipped = mc.q_form_semigroup(&VolumeForm, &[&v, &u]).unwrap();
        assert_eq!(flipped.mean, -r.mean);
        let zero = mc.q_form_semigroup(&ZeroForm(2), &[&u, &v]).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn q_form_reduces_to_one_form() {
        let model = GradientSphere::new(2).unwrap();
        let (x0, v0) = circle_point(1.1);
        let mc = MonteCarlo::new(&model, &x0, TimeGrid::new(1.0, 50).unwrap(), 500, 3).unwrap();
        let df = ExactForm::new(StandardObservable::Coordinate(0));
        let a = mc.one_form_semigroup(&df, &v0).unwrap();
        let b = mc.q_form_semigroup(&df, &[&v0]).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn degree_zero_exterior_gradient_is_bel_gradient() {
        let model = brownian(1).unwrap();
        let mc = MonteCarlo::new(&model, &[0.0], TimeGrid::new(1.0, 100).unwrap(), 4000, 6).unwrap();
        let f = StandardObservable::Sin(0);
        let a = mc.form_exterior_gradient(&FunctionForm::new(f), &[&[1.0]]).unwrap();
        let b = mc.bel_gradient(&f, &[1.0]).unwrap();
        assert_relative_eq!(a.mean, b.mean, max_relative = 1e-12);
        let zero = mc.form_exterior_gradient(&ZeroForm(0), &[&[1.0]]).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn exterior_gradient_of_one_form_on_sphere_is_finite() {
        // d(P_t df) = 0: the two-form estimate should vanish within noise
        let model = GradientSphere::new(3).unwrap();
        let mc = MonteCarlo::new(&model, &[0.0, 0.0, 1.0], TimeGrid::new(0.5, 50).unwrap(), 2000, 2).unwrap();
        let df = ExactForm::new(StandardObservable::Coordinate(0));
        let r = mc.form_exterior_gradient(&df, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        assert!(r.mean.abs() <= 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn refusals() {
        let circle = GradientSphere::new(2).unwrap();
        let (x0, v0) = circle_point(0.0);
        let mc = MonteCarlo::new(&circle, &x0, TimeGrid::new(1.0, 10).unwrap(), 10, 0).unwrap();
        let open = FnForm::new(1, false, |_, v| v[0][0]);
        assert_eq!(mc.one_form_semigroup(&open, &v0).unwrap_err(), Error::NotClosed);
        let no_codiff = FnForm::new(1, true, |_, v| v[0][0]);
        assert_eq!(mc.one_form_semigroup(&no_codiff, &v0).unwrap_err(), Error::MissingCodifferential);
        assert_eq!(
            mc.q_form_semigroup(&AngleForm, &[&v0, &v0]).unwrap_err(),
            Error::DegreeMismatch { expected: 1, got: 2 }
        );
        let three = FnForm::new(3, true, |_, _| 0.0);
        assert!(matches!(
            mc.q_form_semigroup(&three, &[&v0, &v0, &v0]),
            Err(Error::UnsupportedDegree { degree: 3, .. })
        ));
        assert!(matches!(
            mc.one_form_semigroup(&VolumeForm, &v0),
            Err(Error::DegreeMismatch { expected: 1, got: 2 })
        ));
        let so3 = LieGroupModel::so3(1.0).unwrap();
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let mc = MonteCarlo::new(&so3, &id, TimeGrid::new(1.0, 10).unwrap(), 10, 0).unwrap();
        let xi = [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(mc.form_exterior_gradient(&ZeroForm(0), &[&xi]).unwrap_err(), Error::NotGradientSystem);
        let skew = FlatModel::builder(2, 2, |_, x, db, out| {
            out[0] = db[0] + x[1] * db[1];
            out[1] = db[1];
        }, |_, _, out| out.fill(0.0))
        .build()
        .unwrap();
        let mc = MonteCarlo::new(&skew, &[0.0, 0.0], TimeGrid::new(1.0, 10).unwrap(), 10, 0).unwrap();
        assert_eq!(
            mc.one_form_semigroup(&ExactForm::new(StandardObservable::Sin(0)), &[1.0, 0.0]).unwrap_err(),
            Error::NotGradientSystem
        );
    }
}
