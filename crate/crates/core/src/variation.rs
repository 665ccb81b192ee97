//! Linearized flows co-evolved along a trajectory on the trajectory's noise.
//!
//! The first and second variations are exact derivatives of the discrete
//! integrator, so for manifold models they include the derivative of the
//! retraction and stay tangent at every step.

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::models::{validate_point, validate_tangent, DiffusionModel, ManifoldGeometry, StepWorkspace};
use crate::paths::{check_noise, NoisePath, PathOptions, TimeGrid, Trajectory};

/// A sequence of ambient vectors attached to the states of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationPath {
    vectors: Vec<f64>,
    dim: usize,
}

impl VariationPath {
    fn with_capacity(dim: usize, len: usize) -> Self {
        Self {
            vectors: Vec::with_capacity(dim * len),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.vector(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.vector(self.len() - 1)
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }
}

/// `w_k = D²F_{t_k}(u_0, v_0)`; starts at zero.
pub type SecondVariationPath = VariationPath;

/// `W_k`, the Hessian flow started at `v_0`.
pub type HessianFlowPath = VariationPath;

fn check_inputs<M: DiffusionModel + ?Sized>(model: &M, traj: &Trajectory, noise: &NoisePath) -> Result<()> {
    traj.ensure_complete()?;
    if traj.dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "trajectory dimension",
            expected: model.ambient_dim(),
            got: traj.dim(),
        });
    }
    if noise.dim() != model.noise_dim() || noise.n_steps() + 1 != traj.len() {
        return Err(Error::DimensionMismatch {
            what: "noise path",
            expected: traj.len() - 1,
            got: noise.n_steps(),
        });
    }
    Ok(())
}

/// `v_{k+1}` = derivative of the integrator step at `x_k` applied to `v_k`.
pub fn evolve_first_variation<M: DiffusionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    noise: &NoisePath,
    v0: &[f64],
) -> Result<VariationPath> {
    check_inputs(model, traj, noise)?;
    validate_tangent(model, traj.initial(), v0)?;
    let n = traj.dim();
    let dt = traj.grid().dt();
    let mut path = VariationPath::with_capacity(n, traj.len());
    path.vectors.extend_from_slice(v0);
    let mut ws = StepWorkspace::new(n);
    let mut cur = v0.to_vec();
    let mut next = vec![0.0; n];
    for k in 0..traj.len() - 1 {
        model.step_tangent(traj.time(k), dt, traj.state(k), noise.increment(k), &cur, &mut next, &mut ws)?;
        path.vectors.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(path)
}

/// Integrates the trajectory and its first variation in a single pass. The
/// result is bit-identical to [`integrate_ito_with`](crate::paths::integrate_ito_with)
/// followed by [`evolve_first_variation`]. If the path blows up, both outputs
/// stop at the last finite state.
pub fn integrate_with_variation<M: DiffusionModel + ?Sized>(
    model: &M,
    x0: &[f64],
    v0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    opts: &PathOptions,
) -> Result<(Trajectory, VariationPath)> {
    validate_point(model, x0)?;
    check_noise(model, grid, noise)?;
    validate_tangent(model, x0, v0)?;
    let n = x0.len();
    let steps = grid.n_steps();
    let dt = grid.dt();
    let mut states = Vec::with_capacity((steps + 1) * n);
    let mut path = VariationPath::with_capacity(n, steps + 1);
    states.extend_from_slice(x0);
    path.vectors.extend_from_slice(v0);
    let mut ws = StepWorkspace::new(n);
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    let (mut xn, mut vn) = (vec![0.0; n], vec![0.0; n]);
    let r2 = opts.blow_up_radius * opts.blow_up_radius;
    let mut blow_up_step = None;
    for k in 0..steps {
        model.step_with_tangent(opts.clock.at(grid, k), dt, &x, noise.increment(k), &v, &mut xn, &mut vn, &mut ws)?;
        let sq: f64 = xn.iter().map(|a| a * a).sum();
        if !(sq <= r2) {
            blow_up_step = Some(k + 1);
            break;
        }
        states.extend_from_slice(&xn);
        path.vectors.extend_from_slice(&vn);
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut v, &mut vn);
    }
    let traj = Trajectory::from_parts(states, n, *grid, opts.clock, blow_up_step);
    Ok((traj, path))
}

/// Second variation `w` driven by the first variations `u`, `v` on the same
/// noise: `w' = w + DX(w)ΔB + DZ(w)dt + D²X(u,v)ΔB + D²Z(u,v)dt`, composed
/// with the retraction's first and second derivatives on manifolds.
pub fn evolve_second_variation<M: DiffusionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    noise: &NoisePath,
    u_path: &VariationPath,
    v_path: &VariationPath,
) -> Result<SecondVariationPath> {
    check_inputs(model, traj, noise)?;
    if u_path.len() != traj.len() || v_path.len() != traj.len() {
        return Err(Error::DimensionMismatch {
            what: "variation path length",
            expected: traj.len(),
            got: u_path.len().min(v_path.len()),
        });
    }
    let n = traj.dim();
    let dt = traj.grid().dt();
    let mut path = VariationPath::with_capacity(n, traj.len());
    path.vectors.resize(n, 0.0);
    let mut ws = StepWorkspace::new(n);
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    for k in 0..traj.len() - 1 {
        model.step_second(
            traj.time(k),
            dt,
            traj.state(k),
            noise.increment(k),
            u_path.vector(k),
            v_path.vector(k),
            &cur,
            &mut next,
            &mut ws,
        )?;
        path.vectors.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(path)
}

/// Projects `v` onto `T_x M` and rescales to the original length.
pub fn transport_step(geometry: &dyn ManifoldGeometry, x: &[f64], v: &[f64], out: &mut [f64]) {
    geometry.project_tangent(x, v, out);
    let before = norm(v);
    let after = norm(out);
    if after > 0.0 {
        let s = before / after;
        out.iter_mut().for_each(|o| *o *= s);
    }
}

/// Discrete parallel transport of `v0` along the trajectory. Flat models
/// return the constant path.
pub fn parallel_transport<M: DiffusionModel + ?Sized>(model: &M, traj: &Trajectory, v0: &[f64]) -> Result<VariationPath> {
    traj.ensure_complete()?;
    validate_tangent(model, traj.initial(), v0)?;
    let n = traj.dim();
    let mut path = VariationPath::with_capacity(n, traj.len());
    path.vectors.extend_from_slice(v0);
    let mut cur = v0.to_vec();
    let mut next = vec![0.0; n];
    for k in 1..traj.len() {
        match model.geometry() {
            Some(g) => transport_step(g, traj.state(k), &cur, &mut next),
            None => next.copy_from_slice(&cur),
        }
        path.vectors.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(path)
}

/// Hessian flow `dW/dt = -½ Ric^#(W) + ∇Z(W)`, integrated by transporting
/// `W_k` to `x_{k+1}` and taking one Euler step in the new tangent space.
pub fn evolve_hessian_flow<M: DiffusionModel + ?Sized>(model: &M, traj: &Trajectory, v0: &[f64]) -> Result<HessianFlowPath> {
    traj.ensure_complete()?;
    validate_tangent(model, traj.initial(), v0)?;
    let n = traj.dim();
    let dt = traj.grid().dt();
    let mut path = VariationPath::with_capacity(n, traj.len());
    path.vectors.extend_from_slice(v0);
    let mut cur = v0.to_vec();
    let mut moved = vec![0.0; n];
    let mut ric = vec![0.0; n];
    let mut gz = vec![0.0; n];
    for k in 1..traj.len() {
        let x = traj.state(k);
        let t = traj.time(k);
        match model.geometry() {
            Some(g) => {
                transport_step(g, x, &cur, &mut moved);
                g.ricci_sharp(x, &moved, &mut ric);
                model.generator_drift_derivative(t, x, &moved, &mut gz)?;
                for i in 0..n {
                    ric[i] = moved[i] + dt * (-0.5 * ric[i] + gz[i]);
                }
                g.project_tangent(x, &ric, &mut cur);
            }
            None => {
                model.generator_drift_derivative(t, x, &cur, &mut gz)?;
                for i in 0..n {
                    cur[i] += dt * gz[i];
                }
            }
        }
        path.vectors.extend_from_slice(&cur);
    }
    Ok(path)
}
