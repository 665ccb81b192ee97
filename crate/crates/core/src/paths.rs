//! Time grids, counter-based Brownian noise, and Euler–Maruyama integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::observable::Potential;
use crate::models::{validate_point, DiffusionModel, StepWorkspace};

/// Tolerance on the constraint residual of manifold states.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Default blow-up radius.
pub const BLOW_UP_RADIUS: f64 = 1e8;

/// Uniform grid `t_k = k dt` on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("time horizon must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// Time passed to the coefficient callbacks at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Clock {
    /// `t_k`
    #[default]
    Forward,
    /// `horizon - t_k`, for the time-reversed coefficients of Feynman–Kac
    /// representations.
    Reversed { horizon: f64 },
    /// `start + t_k`, for simulations restarted mid-path.
    Offset { start: f64 },
}

impl Clock {
    pub fn at(&self, grid: &TimeGrid, k: usize) -> f64 {
        match *self {
            Clock::Forward => grid.time(k),
            Clock::Reversed { horizon } => horizon - grid.time(k),
            Clock::Offset { start } => start + grid.time(k),
        }
    }
}

/// Brownian increments `ΔB_k ~ N(0, dt I_m)` for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    increments: Vec<f64>,
    dim: usize,
    seed: u64,
    path_index: u64,
}

impl NoisePath {
    /// Wraps explicit increments (row `k` = `ΔB_k`).
    pub fn from_increments(increments: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !increments.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "noise increments",
                expected: dim,
                got: increments.len(),
            });
        }
        Ok(Self {
            increments,
            dim,
            seed: 0,
            path_index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

const NOISE_TAG: [u8; 16] = *b"semigrad/noise/0";

/// Counter-based generator for `(seed, sub_index)` positioned on stream
/// `path_index`. Distinct triples give independent streams.
pub fn path_rng(seed: u64, sub_index: u64, path_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sub_index.to_le_bytes());
    key[16..].copy_from_slice(&NOISE_TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

/// Noise for path `path_index` under master `seed`.
pub fn generate_noise(grid: &TimeGrid, seed: u64, path_index: u64, m: usize) -> NoisePath {
    generate_noise_substream(grid, seed, path_index, 0, m)
}

/// Noise on an auxiliary sub-stream of `(seed, path_index)`, used for nested
/// simulations. `sub_index = 0` is the primary stream.
pub fn generate_noise_substream(grid: &TimeGrid, seed: u64, path_index: u64, sub_index: u64, m: usize) -> NoisePath {
    let mut rng = path_rng(seed, sub_index, path_index);
    let sd = grid.dt().sqrt();
    let increments = (0..grid.n_steps() * m)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * sd
        })
        .collect();
    NoisePath {
        increments,
        dim: m,
        seed,
        path_index,
    }
}

/// Integration options shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub blow_up_radius: f64,
    pub clock: Clock,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            blow_up_radius: BLOW_UP_RADIUS,
            clock: Clock::Forward,
        }
    }
}

/// A discretized solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<f64>,
    dim: usize,
    grid: TimeGrid,
    clock: Clock,
    blow_up_step: Option<usize>,
    fk_weight: Option<f64>,
}

impl Trajectory {
    /// Wraps externally produced states (row `k` = `x_k`, `n_steps + 1` rows).
    pub fn from_states(states: Vec<f64>, dim: usize, grid: TimeGrid) -> Result<Self> {
        if dim == 0 || states.len() != (grid.n_steps() + 1) * dim {
            return Err(Error::DimensionMismatch {
                what: "trajectory states",
                expected: (grid.n_steps() + 1) * dim,
                got: states.len(),
            });
        }
        Ok(Self {
            states,
            dim,
            grid,
            clock: Clock::Forward,
            blow_up_step: None,
            fk_weight: None,
        })
    }

    pub(crate) fn from_parts(states: Vec<f64>, dim: usize, grid: TimeGrid, clock: Clock, blow_up_step: Option<usize>) -> Self {
        Self {
            states,
            dim,
            grid,
            clock,
            blow_up_step,
            fk_weight: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Number of stored states (`n_steps + 1` unless the path blew up).
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up_step.is_some()
    }

    /// First step whose state left the blow-up radius or became non-finite.
    pub fn blow_up_step(&self) -> Option<usize> {
        self.blow_up_step
    }

    pub fn fk_weight(&self) -> Option<f64> {
        self.fk_weight
    }

    /// Computes and stores `exp(Σ_k V(s_k, x_k) dt)` with `s_k` the clock
    /// time of step `k`. Fails if `V` exceeds its declared upper bound.
    pub fn attach_feynman_kac(&mut self, potential: &dyn Potential) -> Result<f64> {
        let dt = self.grid.dt();
        let bound = potential.upper_bound();
        let mut exponent = 0.0;
        for k in 0..self.len() - 1 {
            let value = potential.value(self.time(k), self.state(k));
            if value > bound + 1e-9 * (1.0 + bound.abs()) {
                return Err(Error::UnboundedPotential { bound, value });
            }
            exponent += value * dt;
        }
        let w = exponent.exp();
        self.fk_weight = Some(w);
        Ok(w)
    }

    /// Coefficient time at step `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.clock.at(&self.grid, k)
    }

    pub(crate) fn ensure_complete(&self) -> Result<()> {
        match self.blow_up_step {
            Some(step) => Err(Error::BlownUpPath { step }),
            None => Ok(()),
        }
    }
}

pub(crate) fn check_noise<M: DiffusionModel + ?Sized>(model: &M, grid: &TimeGrid, noise: &NoisePath) -> Result<()> {
    if noise.dim() != model.noise_dim() {
        return Err(Error::DimensionMismatch {
            what: "noise dimension",
            expected: model.noise_dim(),
            got: noise.dim(),
        });
    }
    if noise.n_steps() != grid.n_steps() {
        return Err(Error::DimensionMismatch {
            what: "noise steps",
            expected: grid.n_steps(),
            got: noise.n_steps(),
        });
    }
    Ok(())
}

fn integrate<M, S>(model: &M, x0: &[f64], grid: &TimeGrid, noise: &NoisePath, opts: &PathOptions, mut step: S) -> Result<Trajectory>
where
    M: DiffusionModel + ?Sized,
    S: FnMut(f64, &[f64], &[f64], &mut [f64], &mut StepWorkspace) -> Result<()>,
{
    validate_point(model, x0)?;
    check_noise(model, grid, noise)?;
    let n = x0.len();
    let steps = grid.n_steps();
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(x0);
    let mut ws = StepWorkspace::new(n);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; n];
    let r2 = opts.blow_up_radius * opts.blow_up_radius;
    let mut blow_up_step = None;
    for k in 0..steps {
        step(opts.clock.at(grid, k), &cur, noise.increment(k), &mut next, &mut ws)?;
        let sq: f64 = next.iter().map(|v| v * v).sum();
        if !(sq <= r2) {
            blow_up_step = Some(k + 1);
            break;
        }
        states.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Trajectory {
        states,
        dim: n,
        grid: *grid,
        clock: opts.clock,
        blow_up_step,
        fk_weight: None,
    })
}

/// Euler–Maruyama on the Itô form, retracted onto the manifold for
/// constrained models.
pub fn integrate_ito<M: DiffusionModel + ?Sized>(model: &M, x0: &[f64], grid: &TimeGrid, noise: &NoisePath) -> Result<Trajectory> {
    integrate_ito_with(model, x0, grid, noise, &PathOptions::default())
}

pub fn integrate_ito_with<M: DiffusionModel + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    opts: &PathOptions,
) -> Result<Trajectory> {
    let dt = grid.dt();
    integrate(model, x0, grid, noise, opts, |t, x, db, out, ws| model.step(t, dt, x, db, out, ws))
}

/// Euler–Maruyama on the Stratonovich form: the Itô drift is rebuilt from
/// `A` and `DX` at every step.
pub fn integrate_stratonovich<M: DiffusionModel + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
) -> Result<Trajectory> {
    integrate_stratonovich_with(model, x0, grid, noise, &PathOptions::default())
}

pub fn integrate_stratonovich_with<M: DiffusionModel + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    opts: &PathOptions,
) -> Result<Trajectory> {
    let dt = grid.dt();
    let n = x0.len();
    let mut drift = vec![0.0; n];
    integrate(model, x0, grid, noise, opts, |t, x, db, out, ws| {
        stratonovich_to_ito_drift(model, t, x, &mut drift)?;
        model.apply_diffusion(t, x, db, out);
        for i in 0..n {
            out[i] = x[i] + out[i] + drift[i] * dt;
        }
        if let Some(g) = model.geometry() {
            ws.y.copy_from_slice(out);
            g.retract(&ws.y, out);
        }
        Ok(())
    })
}

/// `Z(x) = A(x) + ½ Σ_i DX(x)(X^i(x)) e_i`
pub fn stratonovich_to_ito_drift<M: DiffusionModel + ?Sized>(model: &M, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
    let (n, m) = (model.ambient_dim(), model.noise_dim());
    model.stratonovich_drift(t, x, out)?;
    let mut e = vec![0.0; m];
    let mut col = vec![0.0; n];
    let mut corr = vec![0.0; n];
    for i in 0..m {
        e.fill(0.0);
        e[i] = 1.0;
        model.apply_diffusion(t, x, &e, &mut col);
        model.apply_diffusion_derivative(t, x, &col, &e, &mut corr)?;
        for k in 0..n {
            out[k] += 0.5 * corr[k];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::flat;
    use crate::models::sphere::GradientSphere;
    use crate::models::LieGroupModel;
    use approx::assert_relative_eq;

    #[test]
    fn grid_points_are_exact_multiples() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        assert_eq!(g.time(1000), 1000.0 * (1.0 / 1000.0));
        assert_eq!(g.time(7), 7.0 * g.dt());
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn noise_is_reproducible_and_stream_dependent() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let a = generate_noise(&g, 7, 0, 1);
        let b = generate_noise(&g, 7, 0, 1);
        assert_eq!(a.increments(), b.increments());
        let c = generate_noise(&g, 7, 1, 1);
        assert_ne!(a.increments(), c.increments());
        let d = generate_noise_substream(&g, 7, 0, 1, 1);
        assert_ne!(a.increments(), d.increments());
    }

    #[test]
    fn noise_moments_match_clt() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let dt = g.dt();
        let draws: Vec<f64> = (0..1000u64).flat_map(|i| generate_noise(&g, 11, i, 1).increments().to_vec()).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 * (dt / n).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.01, "variance ratio {}", var / dt);
    }

    #[test]
    fn brownian_states_are_partial_sums() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let m = flat::brownian(1).unwrap();
        let noise = generate_noise(&g, 3, 0, 1);
        let traj = integrate_ito(&m, &[0.0], &g, &noise).unwrap();
        let mut s = 0.0;
        for k in 0..50 {
            s += noise.increment(k)[0];
            assert_eq!(traj.state(k + 1)[0], s);
        }
    }

    #[test]
    fn ou_without_noise_follows_exponential() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let m = flat::ornstein_uhlenbeck(1, 1.0).unwrap();
        let noise = NoisePath::from_increments(vec![0.0; 1000], 1).unwrap();
        let traj = integrate_ito(&m, &[1.0], &g, &noise).unwrap();
        for k in (0..=1000).step_by(100) {
            assert!((traj.state(k)[0] - (-g.time(k)).exp()).abs() < g.dt());
        }
    }

    #[test]
    fn circle_paths_stay_on_circle() {
        let g = TimeGrid::new(1.0, 200).unwrap();
        let m = GradientSphere::new(2).unwrap();
        for i in 0..20 {
            let traj = integrate_ito(&m, &[1.0, 0.0], &g, &generate_noise(&g, 5, i, 2)).unwrap();
            for k in 0..traj.len() {
                let x = traj.state(k);
                assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs() <= CONSTRAINT_TOLERANCE);
            }
        }
    }

    #[test]
    fn stratonovich_matches_ito_for_constant_diffusion() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let m = flat::ornstein_uhlenbeck(1, 0.7).unwrap();
        let noise = generate_noise(&g, 1, 0, 1);
        let a = integrate_ito(&m, &[0.3], &g, &noise).unwrap();
        let b = integrate_stratonovich(&m, &[0.3], &g, &noise).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn ito_drift_on_spheres() {
        let c = GradientSphere::new(2).unwrap();
        let mut z = [0.0; 2];
        stratonovich_to_ito_drift(&c, 0.0, &[1.0, 0.0], &mut z).unwrap();
        assert_relative_eq!(z[0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(z[1], 0.0, epsilon = 1e-15);
        let s = GradientSphere::new(3).unwrap();
        let mut z = [0.0; 3];
        stratonovich_to_ito_drift(&s, 0.0, &[0.0, 0.0, 1.0], &mut z).unwrap();
        assert_relative_eq!(z[2], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn so3_without_noise_is_constant() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = LieGroupModel::so3(1.0).unwrap();
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let noise = NoisePath::from_increments(vec![0.0; 30], 3).unwrap();
        let traj = integrate_ito(&m, &id, &g, &noise).unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.state(k), &id);
        }
    }

    #[test]
    fn explosive_drift_is_flagged() {
        let g = TimeGrid::new(2.0, 200).unwrap();
        let m = flat::power_drift(1.0, 3).unwrap();
        let noise = NoisePath::from_increments(vec![0.0; 200], 1).unwrap();
        let traj = integrate_ito(&m, &[3.0], &g, &noise).unwrap();
        assert!(traj.blew_up());
        assert!(traj.blow_up_step().unwrap() < 200);
    }

    #[test]
    fn wrong_noise_dimension_is_rejected() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = flat::brownian(2).unwrap();
        let noise = generate_noise(&g, 0, 0, 1);
        assert!(matches!(integrate_ito(&m, &[0.0, 0.0], &g, &noise), Err(Error::DimensionMismatch { .. })));
    }
}
