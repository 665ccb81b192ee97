use std::f64::consts::PI;

use super::{DiffusionModel, ManifoldGeometry, ModelKind, StepWorkspace};
use crate::error::{Error, Result};
use crate::linalg::{dot, gram_schmidt, norm};

/// The unit sphere `S^{n-1} ⊂ R^n` with the round metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSphere {
    n: usize,
}

impl UnitSphere {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("sphere needs ambient dimension >= 2, got {n}")));
        }
        Ok(Self { n })
    }
}

impl ManifoldGeometry for UnitSphere {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn intrinsic_dim(&self) -> usize {
        self.n - 1
    }

    fn constraint_violation(&self, x: &[f64]) -> f64 {
        (norm(x) - 1.0).abs()
    }

    fn project_tangent(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let c = dot(x, v);
        for i in 0..self.n {
            out[i] = v[i] - c * x[i];
        }
    }

    fn retract(&self, y: &[f64], out: &mut [f64]) {
        let r = norm(y);
        for i in 0..self.n {
            out[i] = y[i] / r;
        }
    }

    fn retract_derivative(&self, y: &[f64], a: &[f64], out: &mut [f64]) -> Result<()> {
        let r = norm(y);
        let ya = dot(y, a) / (r * r);
        for i in 0..self.n {
            out[i] = (a[i] - y[i] * ya) / r;
        }
        Ok(())
    }

    fn retract_second_derivative(&self, y: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) -> Result<()> {
        let r = norm(y);
        let r2 = r * r;
        let ya = dot(y, a) / r;
        let yb = dot(y, b) / r;
        let ab = dot(a, b);
        for i in 0..self.n {
            let yh = y[i] / r;
            out[i] = -(a[i] * yb + b[i] * ya + yh * ab - 3.0 * yh * ya * yb) / r2;
        }
        Ok(())
    }

    fn ricci(&self, _x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        (self.n as f64 - 2.0) * dot(u, v)
    }

    fn ricci_sharp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        let k = self.n as f64 - 2.0;
        for i in 0..self.n {
            out[i] = k * v[i];
        }
    }

    fn geodesic(&self, x: &[f64], v: &[f64], s: f64, out: &mut [f64]) {
        let speed = norm(v);
        if speed == 0.0 {
            out.copy_from_slice(x);
            return;
        }
        let (sn, cs) = (s * speed).sin_cos();
        for i in 0..self.n {
            out[i] = cs * x[i] + sn * v[i] / speed;
        }
    }

    fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let seeds: Vec<Vec<f64>> = (0..self.n)
            .map(|i| {
                let mut e = vec![0.0; self.n];
                e[i] = 1.0;
                e
            })
            .collect();
        gram_schmidt(seeds, self.n - 1, |v, out| self.project_tangent(x, v, out))
    }

    fn laplacian(&self, x: &[f64], grad: &[f64], hess: &[f64]) -> Result<f64> {
        let n = self.n;
        let mut trace = 0.0;
        let mut xhx = 0.0;
        for i in 0..n {
            trace += hess[i * n + i];
            for j in 0..n {
                xhx += x[i] * hess[i * n + j] * x[j];
            }
        }
        Ok(trace - xhx - (n as f64 - 1.0) * dot(x, grad))
    }

    fn quadrature(&self, n_points: usize) -> Option<Vec<(Vec<f64>, f64)>> {
        if n_points == 0 {
            return None;
        }
        let np = n_points as f64;
        match self.n {
            2 => Some(
                (0..n_points)
                    .map(|j| {
                        let th = 2.0 * PI * j as f64 / np;
                        (vec![th.cos(), th.sin()], 2.0 * PI / np)
                    })
                    .collect(),
            ),
            3 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                Some(
                    (0..n_points)
                        .map(|j| {
                            let z = 1.0 - (2.0 * j as f64 + 1.0) / np;
                            let r = (1.0 - z * z).max(0.0).sqrt();
                            let (s, c) = (golden * j as f64).sin_cos();
                            (vec![r * c, r * s, z], 4.0 * PI / np)
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Gradient Brownian system on `S^{n-1}`: `X(x) = I - x x^T` with `m = n`
/// noise channels, optionally tilted by the linear potential `h(x) = <a, x>`
/// so that the generator is `½Δ + ∇h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSphere {
    geometry: UnitSphere,
    tilt: Option<Vec<f64>>,
}

impl GradientSphere {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            geometry: UnitSphere::new(n)?,
            tilt: None,
        })
    }

    /// Adds the drift `∇h` for `h(x) = <a, x>`.
    pub fn with_linear_tilt(mut self, a: Vec<f64>) -> Result<Self> {
        if a.len() != self.geometry.n {
            return Err(Error::DimensionMismatch {
                what: "tilt vector",
                expected: self.geometry.n,
                got: a.len(),
            });
        }
        self.tilt = Some(a);
        Ok(self)
    }

    pub fn tilt(&self) -> Option<&[f64]> {
        self.tilt.as_deref()
    }

    pub fn sphere(&self) -> &UnitSphere {
        &self.geometry
    }

    fn half_curvature(&self) -> f64 {
        0.5 * (self.geometry.n as f64 - 1.0)
    }
}

/// Unrolled Euler step plus retraction on `S^{N-1}`; optionally the
/// derivative of the same map applied to `v`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn sphere_kernel<const N: usize>(
    half_curv: f64,
    tilt: Option<&[f64]>,
    dt: f64,
    x: &[f64],
    db: &[f64],
    x_out: Option<&mut [f64]>,
    tangent: Option<(&[f64], &mut [f64])>,
) {
    let x: &[f64; N] = x.try_into().expect("state dimension");
    let db: &[f64; N] = db.try_into().expect("noise dimension");
    let a: [f64; N] = match tilt {
        Some(a) => a.try_into().expect("tilt dimension"),
        None => [0.0; N],
    };
    let mut xd = 0.0;
    let mut xa = 0.0;
    for i in 0..N {
        xd += x[i] * db[i];
        xa += x[i] * a[i];
    }
    let mut y = [0.0; N];
    let mut r2 = 0.0;
    for i in 0..N {
        let z = -half_curv * x[i] + a[i] - xa * x[i];
        y[i] = x[i] + (db[i] - xd * x[i]) + z * dt;
        r2 += y[i] * y[i];
    }
    let r = r2.sqrt();
    if let Some(out) = x_out {
        for i in 0..N {
            out[i] = y[i] / r;
        }
    }
    if let Some((v, out)) = tangent {
        let v: &[f64; N] = v.try_into().expect("tangent dimension");
        let mut vd = 0.0;
        let mut va = 0.0;
        for i in 0..N {
            vd += v[i] * db[i];
            va += v[i] * a[i];
        }
        let mut b = [0.0; N];
        let mut yb = 0.0;
        for i in 0..N {
            let dz = -half_curv * v[i] - v[i] * xa - x[i] * va;
            b[i] = v[i] - (v[i] * xd + x[i] * vd) + dz * dt;
            yb += y[i] * b[i];
        }
        let yb = yb / r2;
        for i in 0..N {
            out[i] = (b[i] - y[i] * yb) / r;
        }
    }
}

impl GradientSphere {
    /// Runs the unrolled kernel for `n ∈ {2, 3}`; returns false otherwise.
    #[allow(clippy::too_many_arguments)]
    fn fast_step(&self, dt: f64, x: &[f64], db: &[f64], x_out: Option<&mut [f64]>, tangent: Option<(&[f64], &mut [f64])>) -> bool {
        let k = self.half_curvature();
        let tilt = self.tilt.as_deref();
        match self.geometry.n {
            2 => sphere_kernel::<2>(k, tilt, dt, x, db, x_out, tangent),
            3 => sphere_kernel::<3>(k, tilt, dt, x, db, x_out, tangent),
            _ => return false,
        }
        true
    }
}

impl DiffusionModel for GradientSphere {
    fn ambient_dim(&self) -> usize {
        self.geometry.n
    }

    fn noise_dim(&self) -> usize {
        self.geometry.n
    }

    fn kind(&self) -> ModelKind {
        if self.geometry.n == 2 {
            ModelKind::Circle
        } else {
            ModelKind::GradientSphere
        }
    }

    fn apply_diffusion(&self, _t: f64, x: &[f64], db: &[f64], out: &mut [f64]) {
        self.geometry.project_tangent(x, db, out);
    }

    fn stratonovich_drift(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.tilt {
            Some(a) => self.geometry.project_tangent(x, a, out),
            None => out.fill(0.0),
        }
        Ok(())
    }

    fn ito_drift(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.half_curvature();
        match &self.tilt {
            Some(a) => {
                let xa = dot(x, a);
                for i in 0..x.len() {
                    out[i] = -k * x[i] + a[i] - xa * x[i];
                }
            }
            None => {
                for i in 0..x.len() {
                    out[i] = -k * x[i];
                }
            }
        }
        Ok(())
    }

    fn apply_diffusion_derivative(&self, _t: f64, x: &[f64], u: &[f64], db: &[f64], out: &mut [f64]) -> Result<()> {
        let xd = dot(x, db);
        let ud = dot(u, db);
        for i in 0..x.len() {
            out[i] = -(u[i] * xd + x[i] * ud);
        }
        Ok(())
    }

    fn drift_derivative(&self, _t: f64, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.half_curvature();
        match &self.tilt {
            Some(a) => {
                let xa = dot(x, a);
                let ua = dot(u, a);
                for i in 0..x.len() {
                    out[i] = -k * u[i] - u[i] * xa - x[i] * ua;
                }
            }
            None => {
                for i in 0..x.len() {
                    out[i] = -k * u[i];
                }
            }
        }
        Ok(())
    }

    fn apply_diffusion_second_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        u: &[f64],
        v: &[f64],
        db: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let ud = dot(u, db);
        let vd = dot(v, db);
        for i in 0..u.len() {
            out[i] = -(u[i] * vd + v[i] * ud);
        }
        Ok(())
    }

    fn drift_second_derivative(&self, _t: f64, _x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.tilt {
            Some(a) => {
                let ua = dot(u, a);
                let va = dot(v, a);
                for i in 0..u.len() {
                    out[i] = -u[i] * va - v[i] * ua;
                }
            }
            None => out.fill(0.0),
        }
        Ok(())
    }

    fn apply_right_inverse(&self, _t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        self.geometry.project_tangent(x, v, out);
        Ok(())
    }

    fn apply_right_inverse_derivative(&self, _t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let xv = dot(x, v);
        let uv = dot(u, v);
        for i in 0..x.len() {
            out[i] = -(u[i] * xv + x[i] * uv);
        }
        Ok(())
    }

    fn geometry(&self) -> Option<&dyn ManifoldGeometry> {
        Some(&self.geometry)
    }

    fn generator_drift_derivative(&self, _t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let xa = self.tilt.as_deref().map_or(0.0, |a| dot(x, a));
        for i in 0..v.len() {
            out[i] = -xa * v[i];
        }
        Ok(())
    }

    fn is_gradient_system(&self) -> bool {
        true
    }

    fn step(&self, t: f64, dt: f64, x: &[f64], db: &[f64], out: &mut [f64], ws: &mut StepWorkspace) -> Result<()> {
        if self.fast_step(dt, x, db, Some(out), None) {
            return Ok(());
        }
        super::euler_step(self, t, dt, x, db, out, ws)
    }

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
        if self.fast_step(dt, x, db, None, Some((v, &mut *out))) {
            return Ok(());
        }
        super::euler_step_tangent(self, t, dt, x, db, v, out, ws)
    }

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
        if self.fast_step(dt, x, db, Some(&mut *x_out), Some((v, &mut *v_out))) {
            return Ok(());
        }
        super::euler_step_with_tangent(self, t, dt, x, db, v, x_out, v_out, ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ito_drift_matches_stratonovich_correction() {
        let m = GradientSphere::new(3).unwrap().with_linear_tilt(vec![0.2, -0.4, 0.7]).unwrap();
        let x = [0.6, 0.0, 0.8];
        let mut direct = [0.0; 3];
        let mut generic = [0.0; 3];
        m.ito_drift(0.0, &x, &mut direct).unwrap();
        crate::paths::stratonovich_to_ito_drift(&m, 0.0, &x, &mut generic).unwrap();
        for i in 0..3 {
            assert_relative_eq!(direct[i], generic[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn unrolled_step_matches_generic_step() {
        let m = GradientSphere::new(3).unwrap().with_linear_tilt(vec![0.3, 0.1, -0.2]).unwrap();
        let x = [0.6, 0.0, 0.8];
        let v = [0.0, 1.0, 0.0];
        let db = [0.05, -0.1, 0.02];
        let mut ws = StepWorkspace::new(3);
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        let (mut c, mut d) = ([0.0; 3], [0.0; 3]);
        m.step_with_tangent(0.0, 0.01, &x, &db, &v, &mut a, &mut b, &mut ws).unwrap();
        crate::models::euler_step(&m, 0.0, 0.01, &x, &db, &mut c, &mut ws).unwrap();
        crate::models::euler_step_tangent(&m, 0.0, 0.01, &x, &db, &v, &mut d, &mut ws).unwrap();
        for i in 0..3 {
            assert_relative_eq!(a[i], c[i], epsilon = 1e-15);
            assert_relative_eq!(b[i], d[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn retraction_derivatives_match_finite_differences() {
        let g = UnitSphere::new(3).unwrap();
        let y = [0.9, -0.3, 0.5];
        let a = [0.2, 0.7, -0.1];
        let b = [-0.4, 0.1, 0.3];
        let h = 1e-5;
        let mut plus = [0.0; 3];
        let mut minus = [0.0; 3];
        let shift = |s: f64, d: &[f64]| [y[0] + s * d[0], y[1] + s * d[1], y[2] + s * d[2]];
        g.retract(&shift(h, &a), &mut plus);
        g.retract(&shift(-h, &a), &mut minus);
        let mut dr = [0.0; 3];
        g.retract_derivative(&y, &a, &mut dr).unwrap();
        for i in 0..3 {
            assert_relative_eq!(dr[i], (plus[i] - minus[i]) / (2.0 * h), epsilon = 1e-8);
        }
        let mut drp = [0.0; 3];
        let mut drm = [0.0; 3];
        g.retract_derivative(&shift(h, &b), &a, &mut drp).unwrap();
        g.retract_derivative(&shift(-h, &b), &a, &mut drm).unwrap();
        let mut d2 = [0.0; 3];
        g.retract_second_derivative(&y, &a, &b, &mut d2).unwrap();
        for i in 0..3 {
            assert_relative_eq!(d2[i], (drp[i] - drm[i]) / (2.0 * h), epsilon = 1e-7);
        }
    }

    #[test]
    fn laplacian_of_height_is_eigenfunction() {
        let g = UnitSphere::new(3).unwrap();
        let x = [0.0, 0.6, 0.8];
        let lap = g.laplacian(&x, &[0.0, 0.0, 1.0], &[0.0; 9]).unwrap();
        assert_relative_eq!(lap, -2.0 * 0.8, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_integrates_constants_and_second_moments() {
        let g = UnitSphere::new(3).unwrap();
        let q = g.quadrature(4000).unwrap();
        let area: f64 = q.iter().map(|(_, w)| w).sum();
        let z2: f64 = q.iter().map(|(p, w)| p[2] * p[2] * w).sum();
        assert_relative_eq!(area, 4.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(z2, 4.0 * PI / 3.0, epsilon = 1e-5);
        let c = UnitSphere::new(2).unwrap().quadrature(64).unwrap();
        let len: f64 = c.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(len, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn frame_is_orthonormal_and_tangent() {
        let g = UnitSphere::new(3).unwrap();
        let x = [1.0, 0.0, 0.0];
        let f = g.tangent_frame(&x);
        assert_eq!(f.len(), 2);
        for (i, a) in f.iter().enumerate() {
            assert_relative_eq!(dot(a, &x), 0.0, epsilon = 1e-15);
            for (j, b) in f.iter().enumerate() {
                assert_relative_eq!(dot(a, b), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }
}
