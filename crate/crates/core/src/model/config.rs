//! Model files.
//!
//! ```toml
//! [model]
//! a = -0.4
//! b = 0.5
//! c = 1.0
//! sigma = 0.3
//! epsilon = 0.2
//! g_coeffs = [0.0, 0.0, 0.0, 1.0]
//! x0_mean = 0.0
//! x0_var = 0.0
//!
//! [grid]
//! t0 = 0.0
//! dt = 0.01
//! n_steps = 10000
//!
//! [run]          # optional
//! seed = 7
//! paths = 1000
//! order = 2
//! r = [0.1, 0.2, 0.3]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PerturbedLinearModel, PolySpec, TimeGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub g_coeffs: Vec<f64>,
    #[serde(default)]
    pub x0_mean: f64,
    #[serde(default)]
    pub x0_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub order: Option<usize>,
    pub r: Option<Vec<f64>>,
    pub reg: Option<f64>,
    pub max_degree: Option<usize>,
}

/// Parsed model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text of the effective configuration.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("model file serializes")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.t0, self.grid.dt, self.grid.n_steps)
    }

    pub fn perturbed(&self) -> Result<PerturbedLinearModel> {
        let m = &self.model;
        let cap = self
            .run
            .max_degree
            .unwrap_or(super::poly::DEFAULT_DEGREE_CAP);
        let g = PolySpec::with_cap(m.g_coeffs.clone(), cap)?;
        PerturbedLinearModel::new(m.a, m.b, m.c, m.sigma, m.epsilon, g)?
            .with_initial(m.x0_mean, m.x0_var)
    }
}
