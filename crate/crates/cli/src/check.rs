//! The `check` subcommand: diagnostics for one scenario.

use std::f64::consts::PI;

use semigrad::diagnostics::{
    finite_difference_oracle, gronwall_gradient_bound, martingale_mean_check, moment_bound_check_sampled, sample_cloud,
    sobolev_norm_check, BoundCheckReport, GronwallConstants, SobolevCheck, DEFAULT_CLOUD_POINTS,
};
use semigrad::registry::scenario;
use semigrad::{MonteCarlo, Observable, TimeGrid};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Moment, martingale, finite-difference, Gronwall and (on compact
/// scenarios) Sobolev checks at the scenario's default point.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<BoundCheckReport>, CliError> {
    let s = scenario(&cfg.scenario).ok_or_else(|| CliError::UnknownScenario(cfg.scenario.clone()))?;
    let model = s.model();
    let f_id = cfg.f.clone().unwrap_or_else(|| s.default_observable.to_string());
    let f = s
        .observable(&f_id)
        .ok_or_else(|| CliError::InvalidConfig(format!("scenario {} has no observable {f_id:?}", s.id)))?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| s.x0.clone());
    let v0 = cfg.v0.clone().unwrap_or_else(|| s.v0.clone());
    let n_paths = usize::try_from(cfg.n_paths).map_err(|_| CliError::InvalidConfig("n_paths is too large".into()))?;
    let n_steps = usize::try_from(cfg.n_steps).map_err(|_| CliError::InvalidConfig("n_steps is too large".into()))?;
    let grid = TimeGrid::new(cfg.t, n_steps)?;
    let mc = MonteCarlo::new(model.as_ref(), &x0, grid, n_paths, cfg.seed)?;
    let spread = if model.geometry().is_some() { PI } else { 1.0 };
    let cloud = sample_cloud(model.as_ref(), &x0, DEFAULT_CLOUD_POINTS, spread, cfg.seed);

    let mut reports = vec![
        moment_bound_check_sampled(&mc, 2.0, &v0, &cloud)?,
        martingale_mean_check(&mc, &v0)?,
    ];

    let bel = mc.bel_gradient(&f, &v0)?;
    let fd = finite_difference_oracle(&mc, &f, &v0, cfg.delta)?;
    let joint = bel.std_error.hypot(fd.std_error);
    reports.push(BoundCheckReport::new("bel_vs_finite_difference", 3.0 * joint, (bel.mean - fd.mean).abs(), joint, 0.0));

    if f.sup_norm().is_some() {
        let constants = GronwallConstants::sample(model.as_ref(), &cloud)?;
        reports.push(gronwall_gradient_bound(&mc, &f, &v0, constants)?);
    }
    let compact = model.geometry().and_then(|g| g.quadrature(16)).is_some();
    if compact {
        let cfg = SobolevCheck {
            t: cfg.t,
            n_steps: n_steps.min(200),
            n_paths: n_paths.min(2000),
            seed: cfg.seed,
            grid_points: 16,
            p: 2.0,
        };
        reports.push(sobolev_norm_check(model.as_ref(), &f, None, cfg)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass_on_builtin_scenarios() {
        for id in ["bm1d", "circle"] {
            let cfg = ExperimentConfig {
                scenario: id.into(),
                n_paths: 4000,
                n_steps: 100,
                seed: 1,
                ..Default::default()
            };
            let reports = run_checks(&cfg).unwrap();
            assert!(reports.len() >= 4);
            for r in &reports {
                assert!(r.pass, "{id}: {r:?}");
            }
        }
        let bad = ExperimentConfig {
            scenario: "torus".into(),
            ..Default::default()
        };
        assert!(matches!(run_checks(&bad), Err(CliError::UnknownScenario(_))));
    }
}
