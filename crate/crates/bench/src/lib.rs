//! Shared fixtures for the criterion benchmarks.

use semigrad::registry::{scenario, Scenario};
use semigrad::{DiffusionModel, MonteCarlo, Result, TimeGrid};

/// Scenarios covered by the benchmarks: flat, compact and group-valued.
pub const SCENARIOS: [&str; 4] = ["bm1d", "ou1d", "sphere3", "so3"];

/// A scenario with its model built once.
pub struct Fixture {
    pub scenario: Scenario,
    pub model: Box<dyn DiffusionModel>,
}

impl Fixture {
    pub fn new(id: &str) -> Self {
        let scenario = scenario(id).unwrap_or_else(|| panic!("unknown scenario {id}"));
        let model = scenario.model();
        Self { scenario, model }
    }

    pub fn monte_carlo(&self, n_paths: usize, n_steps: usize) -> Result<MonteCarlo<'_>> {
        MonteCarlo::new(self.model.as_ref(), &self.scenario.x0, TimeGrid::new(1.0, n_steps)?, n_paths, 7)
    }
}
