//! JSON document for an identified model.

use std::path::Path;

use anyhow::{Context, Result};
use recipgm::solver::{Diagnostics, ModelEstimate, SolverConfig};
use recipgm::synthgen::{matrix_from_doc, matrix_to_doc, MatrixDoc};
use recipgm::{BandedBlockCirculant, SupportPattern};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub m: usize,
    pub n: usize,
    pub period: usize,
    pub config: SolverConfig,
    /// Lags `X_0, …, X_n` of the estimated concentration `S − L`.
    pub x_lags: Vec<MatrixDoc>,
    pub support: SupportPattern,
    pub latent_count: usize,
    pub diagnostics: Diagnostics,
}

impl EstimateDoc {
    /// Drops the residual trace, which is written separately.
    pub fn new(est: &ModelEstimate, config: &SolverConfig) -> Self {
        let mut diagnostics = est.diagnostics.clone();
        diagnostics.trace.clear();
        EstimateDoc {
            m: est.x.m(),
            n: est.x.bandwidth(),
            period: est.x.period(),
            config: config.clone(),
            x_lags: est.x.lags().iter().map(matrix_to_doc).collect(),
            support: est.support.clone(),
            latent_count: est.latent_count,
            diagnostics,
        }
    }

    pub fn concentration(&self) -> Result<BandedBlockCirculant> {
        let lags = self.x_lags.iter().map(matrix_from_doc).collect::<recipgm::Result<Vec<_>>>()?;
        Ok(BandedBlockCirculant::from_lags(self.period, &lags)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
