//! Run configuration shared by the CLI and the verification suites.

use crate::family::FamilyConfig;
use crate::parabolic::ParabolicConfig;
use crate::rclass::Budgets;
use crate::dimension::Truncation;
use serde::{Deserialize, Serialize};

/// The four scale constants of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    pub eps0: f64,
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            eps0: 1e-4,
            eta: 0.05,
            tau: 0.25,
            beta: 1.3,
        }
    }
}

impl Constants {
    /// Warn when the ordering `0 < eps0 << eta << tau << beta - 1 < 1`
    /// fails (non-fatal).
    pub fn ordering_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.eps0 <= 0.0 || self.eps0 >= self.eta {
            w.push(format!("expected 0 < eps0 < eta, got {} vs {}", self.eps0, self.eta));
        }
        if self.eta >= self.tau {
            w.push(format!("expected eta < tau, got {} vs {}", self.eta, self.tau));
        }
        if self.tau >= self.beta - 1.0 {
            w.push(format!(
                "expected tau < beta - 1, got {} vs {}",
                self.tau,
                self.beta - 1.0
            ));
        }
        if self.beta - 1.0 >= 1.0 {
            w.push(format!("expected beta - 1 < 1, got {}", self.beta - 1.0));
        }
        w
    }
}

/// Full configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub constants: Constants,
    pub budgets: Budgets,
    pub truncation: Truncation,
    pub parabolic: ParabolicConfig,
    /// Candidate indices selecting the interval-tree path to materialize.
    pub path: Vec<usize>,
    /// Parameter override for geometry dumps (defaults to the root
    /// interval's midpoint).
    pub t: Option<f64>,
    /// Seed for the randomized verification suites.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: FamilyConfig::default(),
            constants: Constants::default(),
            budgets: Budgets::default(),
            truncation: Truncation::default(),
            parabolic: ParabolicConfig::default(),
            path: Vec::new(),
            t: None,
            seed: 1,
        }
    }
}

impl RunConfig {
    /// Keep the family's tongue scale in sync with the constants.
    pub fn normalized(mut self) -> Self {
        self.family.eps0 = self.constants.eps0;
        self
    }
}
