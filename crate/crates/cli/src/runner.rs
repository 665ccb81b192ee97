use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use semigrad::diagnostics::finite_difference_oracle;
use semigrad::registry::{scenario, OracleQuery, Quantity, Scenario};
use semigrad::{ConditionalBinSpec, ConstantPotential, EstimatorResult, FormField, HessianVariant, MonteCarlo, TimeGrid};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Estimators addressable from a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorId {
    Value,
    BelGradient,
    PathwiseGradient,
    FiniteDifference,
    HessianFlowGradient,
    HessianWeights,
    HessianNested,
    PotentialGradient,
    ScoreGradient,
    LieGradient,
    OneForm,
    QForm,
    FormGradient,
    Weight,
}

impl EstimatorId {
    pub const ALL: [(&'static str, EstimatorId); 14] = [
        ("bel_gradient", Self::BelGradient),
        ("finite_difference", Self::FiniteDifference),
        ("form_gradient", Self::FormGradient),
        ("hessian_flow_gradient", Self::HessianFlowGradient),
        ("hessian_nested", Self::HessianNested),
        ("hessian_weights", Self::HessianWeights),
        ("lie_gradient", Self::LieGradient),
        ("one_form", Self::OneForm),
        ("pathwise_gradient", Self::PathwiseGradient),
        ("potential_gradient", Self::PotentialGradient),
        ("q_form", Self::QForm),
        ("score_gradient", Self::ScoreGradient),
        ("value", Self::Value),
        ("weight", Self::Weight),
    ];

    fn uses_form(self) -> bool {
        matches!(self, Self::OneForm | Self::QForm | Self::FormGradient)
    }
}

impl FromStr for EstimatorId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .iter()
            .find(|(name, _)| *name == s)
            .map(|&(_, id)| id)
            .ok_or_else(|| CliError::UnknownEstimator(s.to_string()))
    }
}

/// One row of a report: the config echo, the estimate and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub scenario: String,
    pub estimator: String,
    pub observable: Option<String>,
    pub t: f64,
    pub n_paths: u64,
    pub n_steps: u64,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub n_rejected: Option<usize>,
    pub valid: Option<bool>,
    pub oracle: Option<f64>,
    /// Where the oracle value comes from.
    pub oracle_source: Option<String>,
    pub abs_error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub wall_ms: u64,
    pub error: Option<String>,
    pub metadata: BTreeMap<String, f64>,
}

impl ReportRecord {
    fn echo(cfg: &ExperimentConfig) -> Self {
        Self {
            scenario: cfg.scenario.clone(),
            estimator: cfg.estimator.clone(),
            observable: cfg.form.clone().or_else(|| cfg.f.clone()),
            t: cfg.t,
            n_paths: cfg.n_paths,
            n_steps: cfg.n_steps,
            seed: cfg.seed,
            x0: cfg.x0.clone(),
            mean: None,
            std_error: None,
            n_rejected: None,
            valid: None,
            oracle: None,
            oracle_source: None,
            abs_error: None,
            tolerance: cfg.tolerance,
            pass: false,
            wall_ms: 0,
            error: None,
            metadata: BTreeMap::new(),
        }
    }

    /// Row describing a config that could not run.
    pub fn failed(cfg: &ExperimentConfig, error: &CliError) -> Self {
        Self {
            error: Some(error.to_string()),
            ..Self::echo(cfg)
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

/// Resolved inputs of one experiment.
struct Resolved {
    scenario: Scenario,
    estimator: EstimatorId,
    f: String,
    form: Option<String>,
    x0: Vec<f64>,
    v0: Vec<f64>,
    u0: Vec<f64>,
}

fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, CliError> {
    cfg.validate()?;
    let scenario = scenario(&cfg.scenario).ok_or_else(|| CliError::UnknownScenario(cfg.scenario.clone()))?;
    let estimator: EstimatorId = cfg.estimator.parse()?;
    let f = cfg.f.clone().unwrap_or_else(|| scenario.default_observable.to_string());
    if scenario.observable(&f).is_none() && !estimator.uses_form() {
        return Err(CliError::InvalidConfig(format!(
            "scenario {} has no observable {f:?} (available: {})",
            scenario.id,
            scenario.observable_ids().join(", ")
        )));
    }
    let form = estimator.uses_form().then(|| cfg.form.clone().unwrap_or_else(|| format!("exact:{f}")));
    let x0 = cfg.x0.clone().unwrap_or_else(|| scenario.x0.clone());
    let mut v0 = cfg.v0.clone().unwrap_or_else(|| scenario.v0.clone());
    let u0 = cfg.u0.clone().unwrap_or_else(|| scenario.u0.clone());
    if estimator == EstimatorId::LieGradient && cfg.v0.is_none() {
        let model = scenario.model();
        if let (Some(group), Some(xi)) = (model.lie_group(), lie_direction(cfg, &scenario)) {
            group.left_translate(&x0, &xi, &mut v0);
        }
    }
    Ok(Resolved {
        scenario,
        estimator,
        f,
        form,
        x0,
        v0,
        u0,
    })
}

fn lie_direction(cfg: &ExperimentConfig, scenario: &Scenario) -> Option<Vec<f64>> {
    cfg.xi.clone().or_else(|| scenario.lie_direction.clone())
}

fn usize_of(v: u64, what: &str) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::InvalidConfig(format!("{what} is too large")))
}

/// Runs one experiment and attaches the registry oracle when one exists.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportRecord, CliError> {
    let start = Instant::now();
    let r = resolve(cfg)?;
    let model = r.scenario.model();
    let grid = TimeGrid::new(cfg.t, usize_of(cfg.n_steps, "n_steps")?)?;
    let mc = MonteCarlo::new(model.as_ref(), &r.x0, grid, usize_of(cfg.n_paths, "n_paths")?, cfg.seed)?;
    let f = r.scenario.observable(&r.f);
    let need_f = || {
        f.ok_or_else(|| CliError::InvalidConfig(format!("scenario {} has no observable {:?}", r.scenario.id, r.f)))
    };
    let form = || -> Result<Box<dyn FormField>, CliError> {
        let id = r.form.as_deref().unwrap_or_default();
        r.scenario.form(id).ok_or_else(|| {
            CliError::InvalidConfig(format!(
                "scenario {} has no form {id:?} (available: {})",
                r.scenario.id,
                r.scenario.form_ids().join(", ")
            ))
        })
    };
    let (result, quantity): (EstimatorResult, Option<Quantity>) = match r.estimator {
        EstimatorId::Value => (mc.semigroup_value(&need_f()?)?, Some(Quantity::Value)),
        EstimatorId::BelGradient => (mc.bel_gradient(&need_f()?, &r.v0)?, Some(Quantity::Gradient)),
        EstimatorId::PathwiseGradient => (mc.pathwise_gradient(&need_f()?, &r.v0)?, Some(Quantity::Gradient)),
        EstimatorId::FiniteDifference => (finite_difference_oracle(&mc, &need_f()?, &r.v0, cfg.delta)?, Some(Quantity::Gradient)),
        EstimatorId::HessianFlowGradient => (mc.hessian_flow_gradient(&need_f()?, &r.v0)?, Some(Quantity::Gradient)),
        EstimatorId::HessianWeights => (
            mc.bel_hessian(&need_f()?, &r.u0, &r.v0, HessianVariant::Weights)?,
            Some(Quantity::Hessian),
        ),
        EstimatorId::HessianNested => {
            let variant = HessianVariant::Nested {
                n_inner: usize_of(cfg.n_inner, "n_inner")?,
            };
            (mc.bel_hessian(&need_f()?, &r.u0, &r.v0, variant)?, Some(Quantity::Hessian))
        }
        EstimatorId::PotentialGradient => {
            let c = cfg
                .potential
                .ok_or_else(|| CliError::InvalidConfig("potential_gradient needs `potential`".into()))?;
            (
                mc.potential_gradient(&need_f()?, &ConstantPotential(c), &r.v0)?,
                Some(Quantity::PotentialGradient { potential: c }),
            )
        }
        EstimatorId::ScoreGradient => {
            let target = cfg
                .target
                .clone()
                .ok_or_else(|| CliError::InvalidConfig("score_gradient needs `target`".into()))?;
            let bins = ConditionalBinSpec::new(target, cfg.bandwidth, cfg.kernel)?;
            (mc.score_gradient(&bins, &r.v0)?, Some(Quantity::Score))
        }
        EstimatorId::LieGradient => {
            let xi = lie_direction(cfg, &r.scenario)
                .ok_or_else(|| CliError::InvalidConfig("lie_gradient needs `xi` on this scenario".into()))?;
            (mc.lie_group_gradient(&need_f()?, &xi)?, Some(Quantity::Gradient))
        }
        EstimatorId::OneForm => (mc.one_form_semigroup(form()?.as_ref(), &r.v0)?, Some(Quantity::Form)),
        EstimatorId::QForm => {
            let theta = form()?;
            let vectors: Vec<&[f64]> = [r.v0.as_slice(), r.u0.as_slice()].into_iter().take(theta.degree()).collect();
            (mc.q_form_semigroup(theta.as_ref(), &vectors)?, Some(Quantity::Form))
        }
        EstimatorId::FormGradient => {
            let theta = form()?;
            let vectors: Vec<&[f64]> = [r.v0.as_slice(), r.u0.as_slice()].into_iter().take(theta.degree() + 1).collect();
            (mc.form_exterior_gradient(theta.as_ref(), &vectors)?, None)
        }
        EstimatorId::Weight => (mc.weight_statistics(&r.v0)?, None),
    };

    let id = r.form.as_deref().unwrap_or(&r.f);
    let oracle = match (r.estimator, quantity) {
        // the stochastic weight is a martingale started at zero
        (EstimatorId::Weight, _) => Some(0.0),
        (_, Some(quantity)) => r.scenario.oracle(&OracleQuery {
            quantity,
            id,
            t: cfg.t,
            x0: &r.x0,
            v0: &r.v0,
            u0: &r.u0,
            target: cfg.target.as_deref().unwrap_or(&[]),
        }),
        (_, None) => None,
    };
    let mut record = ReportRecord::echo(cfg);
    record.observable = Some(id.to_string());
    record.x0 = Some(r.x0.clone());
    record.mean = Some(result.mean);
    record.std_error = Some(result.std_error);
    record.n_rejected = Some(result.n_rejected);
    record.valid = Some(result.valid);
    record.metadata = result.metadata.clone();
    record.oracle = oracle;
    record.oracle_source = oracle.map(|_| {
        if r.estimator == EstimatorId::Weight {
            "martingale".to_string()
        } else {
            "analytic".to_string()
        }
    });
    record.abs_error = oracle.map(|o| (result.mean - o).abs());
    record.pass = result.valid
        && match oracle {
            Some(o) => (result.mean - o).abs() <= (3.0 * result.std_error).max(cfg.tolerance * o.abs()),
            None => result.mean.is_finite(),
        };
    record.wall_ms = start.elapsed().as_millis() as u64;
    Ok(record)
}

/// Runs every config in order; failures become error rows.
pub fn run_suite(configs: &[ExperimentConfig]) -> Vec<ReportRecord> {
    configs
        .iter()
        .map(|cfg| run_experiment(cfg).unwrap_or_else(|e| ReportRecord::failed(cfg, &e)))
        .collect()
}

/// Registry listing, one scenario per line, sorted by id.
pub fn list_scenarios() -> String {
    let mut out = String::new();
    for s in semigrad::registry::scenarios() {
        out.push_str(&format!("{:<8} {}; oracles: {}\n", s.id, s.description, s.oracle_summary()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[&str]) -> ExperimentConfig {
        let pairs: Vec<String> = pairs.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::default().with_overrides(&pairs).unwrap()
    }

    #[test]
    fn estimator_ids_round_trip() {
        for (name, id) in EstimatorId::ALL {
            assert_eq!(name.parse::<EstimatorId>().unwrap(), id);
        }
        let names: Vec<_> = EstimatorId::ALL.iter().map(|(n, _)| *n).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        assert!(matches!("magic".parse::<EstimatorId>(), Err(CliError::UnknownEstimator(_))));
    }

    #[test]
    fn gradient_run_matches_oracle() {
        let c = cfg(&["scenario=bm1d", "estimator=bel_gradient", "f=sin", "n_paths=20000", "n_steps=100", "seed=42"]);
        let r = run_experiment(&c).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.oracle.unwrap() - 0.60653).abs() < 1e-5);
        let again = run_experiment(&c).unwrap();
        assert_eq!(r.mean.unwrap().to_bits(), again.mean.unwrap().to_bits());
    }

    #[test]
    fn constant_observable_has_zero_gradient() {
        let r = run_experiment(&cfg(&["scenario=bm1d", "estimator=bel_gradient", "f=one", "n_paths=5000", "n_steps=50"])).unwrap();
        assert_eq!(r.oracle, Some(0.0));
        assert!(r.pass && r.mean.unwrap().abs() < 4.0 * r.std_error.unwrap(), "{r:?}");
    }

    #[test]
    fn every_estimator_runs_somewhere() {
        let runs: [&[&str]; 14] = [
            &["scenario=ou1d", "estimator=value", "f=x2"],
            &["scenario=circle", "estimator=bel_gradient"],
            &["scenario=sphere3", "estimator=pathwise_gradient", "f=x"],
            &["scenario=bm2d", "estimator=finite_difference"],
            &["scenario=sphere3", "estimator=hessian_flow_gradient", "f=x"],
            &["scenario=bm1d", "estimator=hessian_weights", "x0=pi/2"],
            &["scenario=ou1d", "estimator=hessian_nested", "f=x2", "n_inner=4"],
            &["scenario=bm1d", "estimator=potential_gradient", "potential=0.5"],
            &["scenario=bm1d", "estimator=score_gradient", "target=1", "bandwidth=0.2"],
            &["scenario=so3", "estimator=lie_gradient"],
            &["scenario=circle", "estimator=one_form", "form=dtheta_s1"],
            &["scenario=sphere3", "estimator=q_form", "form=vol_s2"],
            &["scenario=circle", "estimator=form_gradient", "form=dtheta_s1"],
            &["scenario=so3", "estimator=weight"],
        ];
        for pairs in runs {
            let mut pairs = pairs.to_vec();
            pairs.extend(["n_paths=4000", "n_steps=100", "seed=5", "tolerance=0.1"]);
            let r = run_experiment(&cfg(&pairs)).unwrap_or_else(|e| panic!("{pairs:?}: {e}"));
            assert!(r.mean.unwrap().is_finite(), "{pairs:?}");
            if r.oracle.is_some() {
                assert!(r.pass, "{pairs:?} {r:?}");
            }
        }
    }

    #[test]
    fn configuration_errors() {
        let e = run_experiment(&cfg(&["scenario=torus", "estimator=value"])).unwrap_err();
        assert!(matches!(e, CliError::UnknownScenario(_)));
        let e = run_experiment(&cfg(&["scenario=bm1d", "estimator=magic"])).unwrap_err();
        assert!(matches!(e, CliError::UnknownEstimator(_)));
        let e = run_experiment(&cfg(&["scenario=bm1d", "estimator=value", "f=height"])).unwrap_err();
        assert!(matches!(e, CliError::InvalidConfig(_)));
        let e = run_experiment(&cfg(&["scenario=bm1d", "estimator=potential_gradient", "n_paths=10"])).unwrap_err();
        assert!(matches!(e, CliError::InvalidConfig(_)));
        let e = run_experiment(&cfg(&["scenario=bm1d", "estimator=one_form", "form=vol_s2", "n_paths=10"])).unwrap_err();
        assert!(matches!(e, CliError::InvalidConfig(_)));
        let e = run_experiment(&cfg(&["scenario=bm1d", "estimator=value", "x0=0,0", "n_paths=10"])).unwrap_err();
        assert!(matches!(e, CliError::Estimator(_)));
    }

    #[test]
    fn listing() {
        let text = list_scenarios();
        for id in ["bm1d", "ou1d", "circle", "sphere3", "so3"] {
            assert!(text.lines().any(|l| l.starts_with(id)), "{id}");
        }
        assert!(text.lines().all(|l| l.contains("oracles: ")));
        assert_eq!(text, list_scenarios());
    }
}
