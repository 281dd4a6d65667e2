//! `(λ_S, λ_L, α)` grid search and cross-validation.

use std::time::Instant;

use rayon::prelude::*;
use recipgm::covest::{build_sigma_hat, diagonal_load, estimate_lags, TimeSeries, DEFAULT_LOADING};
use recipgm::solver::{solve, Residuals, SolverConfig, TraceEntry};
use recipgm::synthgen::{matrix_from_doc, matrix_to_doc, GroundTruthModel, MatrixDoc};
use recipgm::{BandedBlockCirculant, Error, Result, SupportPattern};
use serde::{Deserialize, Serialize};

use crate::metrics::{spectral_error, support_error, support_f1, theta_grid};

/// `count` linearly spaced values from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Axis { min, max, count }
    }

    pub fn single(value: f64) -> Self {
        Axis::new(value, value, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{name}: count must be at least 1")));
        }
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::Config(format!(
                "{name}: need 0 < min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count > 1 && self.max == self.min {
            return Err(Error::Config(format!("{name}: {} values on an empty range", self.count)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lambda_s: Axis,
    pub lambda_l: Axis,
    pub alphas: Vec<f64>,
    pub period: usize,
    pub order: usize,
    /// Leading samples used for estimation.
    pub train: usize,
    /// Samples after the training block used for validation.
    pub test: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_s: Axis::new(60.0, 130.0, 5),
            lambda_l: Axis::new(3.0, 7.8, 5),
            alphas: vec![1.007],
            period: 30,
            order: 8,
            train: 1000,
            test: 500,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.lambda_s.validate("lambda_s")?;
        self.lambda_l.validate("lambda_l")?;
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a >= 1.0 && a.is_finite())) {
            return Err(Error::Config("alphas must be a nonempty list of values >= 1".into()));
        }
        if self.period % 2 != 0 || self.period <= 2 * self.order {
            return Err(Error::Config(format!(
                "period {} must be even and exceed twice the order {}",
                self.period, self.order
            )));
        }
        if self.train <= self.order {
            return Err(Error::Config(format!(
                "training length {} must exceed the order {}",
                self.train, self.order
            )));
        }
        Ok(())
    }

    /// `(α, λ_S, λ_L)` in report order: α slowest, then `λ_S`, then `λ_L`.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let (ls, ll) = (self.lambda_s.values(), self.lambda_l.values());
        let mut out = Vec::with_capacity(self.alphas.len() * ls.len() * ll.len());
        for &a in &self.alphas {
            for &s in &ls {
                for &l in &ll {
                    out.push((a, s, l));
                }
            }
        }
        out
    }
}

/// Everything recorded for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub alpha: f64,
    pub lambda_s: f64,
    pub lambda_l: f64,
    pub support: Option<SupportPattern>,
    /// `|Ω̂|`, diagonal included.
    pub support_size: Option<usize>,
    pub pairs: Option<usize>,
    pub latent_count: Option<usize>,
    pub latent_ratio: Option<f64>,
    pub support_error: Option<usize>,
    pub support_f1: Option<f64>,
    /// Validation score, filled in by [`cross_validate`].
    pub score: Option<f64>,
    pub spectral_error: Option<f64>,
    pub iterations: usize,
    pub runtime_secs: f64,
    pub converged: bool,
    pub residuals: Option<Residuals>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    /// Lags `X_0, …, X_n` of the estimated concentration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_lags: Vec<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spectral_curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

impl CellRecord {
    fn failed(index: usize, (alpha, lambda_s, lambda_l): (f64, f64, f64), error: String, runtime_secs: f64) -> Self {
        CellRecord {
            index,
            alpha,
            lambda_s,
            lambda_l,
            support: None,
            support_size: None,
            pairs: None,
            latent_count: None,
            latent_ratio: None,
            support_error: None,
            support_f1: None,
            score: None,
            spectral_error: None,
            iterations: 0,
            runtime_secs,
            converged: false,
            residuals: None,
            warnings: Vec::new(),
            error: Some(error),
            x_lags: Vec::new(),
            spectral_curve: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// The estimated concentration, when the cell produced one.
    pub fn estimate(&self, period: usize) -> Option<Result<BandedBlockCirculant>> {
        if self.x_lags.is_empty() {
            return None;
        }
        let lags: Result<Vec<_>> = self.x_lags.iter().map(matrix_from_doc).collect();
        Some(lags.and_then(|l| BandedBlockCirculant::from_lags(period, &l)))
    }
}

/// One record per grid cell, in [`GridSpec::cells`] order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunReport {
    pub cells: Vec<CellRecord>,
}

impl RunReport {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Places where `|Ω̂|` grows with `λ_S` at fixed `(α, λ_L)`.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in &self.cells {
            for b in &self.cells {
                if a.alpha == b.alpha && a.lambda_l == b.lambda_l && a.lambda_s < b.lambda_s {
                    if let (Some(pa), Some(pb)) = (a.pairs, b.pairs) {
                        if pb > pa {
                            out.push(format!(
                                "λ_L = {}: {} pairs at λ_S = {} but {} at λ_S = {}",
                                a.lambda_l, pa, a.lambda_s, pb, b.lambda_s
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    pub keep_traces: bool,
    /// Frequencies for the spectral error when a ground truth is known.
    pub theta_points: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            workers: 0,
            keep_traces: false,
            theta_points: 200,
        }
    }
}

/// Training and validation inputs cut from one series.
#[derive(Debug, Clone)]
pub struct Split {
    pub sigma: BandedBlockCirculant,
    /// Identity shift applied to make the training matrix positive definite.
    pub loading: f64,
    pub test: Option<TimeSeries>,
}

/// Builds `Σ̂` from the first `grid.train` samples (diagonally loaded if it
/// is not positive definite) and keeps the next `grid.test` samples.
pub fn split_series(series: &TimeSeries, grid: &GridSpec) -> Result<Split> {
    if series.len() < grid.train {
        return Err(Error::Data(format!(
            "{} samples, but the grid asks for {} training samples",
            series.len(),
            grid.train
        )));
    }
    let train = series.slice(0, grid.train)?;
    let (sigma, loading) = training_sigma(&train, grid.order, grid.period)?;
    let end = (grid.train + grid.test).min(series.len());
    let test = (grid.test > 0 && end > grid.train + grid.order)
        .then(|| series.slice(grid.train, end))
        .transpose()?;
    Ok(Split { sigma, loading, test })
}

/// `Σ̂` of order `order` and period `period`, loaded if needed.
pub fn training_sigma(series: &TimeSeries, order: usize, period: usize) -> Result<(BandedBlockCirculant, f64)> {
    let sh = build_sigma_hat(&estimate_lags(series, order)?, period)?;
    if sh.is_positive_definite() {
        return Ok((sh.sigma, 0.0));
    }
    let loaded = diagonal_load(&sh.sigma, DEFAULT_LOADING)?;
    let shift = loaded.sigma.block(0)[(0, 0)] - sh.sigma.block(0)[(0, 0)];
    log::warn!(
        "sample covariance is not positive definite (min eigenvalue {:.3e}); loaded by {shift:.3e}",
        sh.min_eigenvalue
    );
    Ok((loaded.sigma, shift))
}

fn run_cell(
    index: usize,
    cell: (f64, f64, f64),
    sigma: &BandedBlockCirculant,
    base: &SolverConfig,
    truth: Option<&GroundTruthModel>,
    opts: &GridOptions,
) -> CellRecord {
    let (alpha, lambda_s, lambda_l) = cell;
    let config = SolverConfig {
        alpha,
        lambda_s,
        lambda_l,
        record_trace: opts.keep_traces,
        ..base.clone()
    };
    let start = Instant::now();
    let est = match solve(sigma, &config) {
        Ok(e) => e,
        Err(e) => return CellRecord::failed(index, cell, e.to_string(), start.elapsed().as_secs_f64()),
    };
    let d = est.diagnostics;
    let mut warnings = d.warnings;
    let (mut err, mut f1, mut spec_mean, mut curve) = (None, None, None, Vec::new());
    if let Some(t) = truth {
        err = support_error(&est.support, &t.support).ok();
        f1 = support_f1(&est.support, &t.support).ok();
        match spectral_error(&est.x, &t.concentration(), &theta_grid(opts.theta_points)) {
            Ok(s) => {
                spec_mean = Some(s.mean);
                curve = s.curve;
            }
            Err(e) => warnings.push(format!("spectral error: {e}")),
        }
    }
    CellRecord {
        index,
        alpha,
        lambda_s,
        lambda_l,
        support_size: Some(est.support.cardinality()),
        pairs: Some(est.support.num_upper_pairs()),
        support: Some(est.support),
        latent_count: Some(est.latent_count),
        latent_ratio: Some(d.latent_ratio),
        support_error: err,
        support_f1: f1,
        score: None,
        spectral_error: spec_mean,
        iterations: d.iterations,
        runtime_secs: start.elapsed().as_secs_f64(),
        converged: d.converged,
        residuals: d.residuals,
        warnings,
        error: None,
        x_lags: est.x.lags().iter().map(matrix_to_doc).collect(),
        spectral_curve: curve,
        trace: d.trace,
    }
}

/// Solves every cell of the grid independently. A failing cell is recorded
/// with its error and does not stop the others.
pub fn grid_search(
    sigma: &BandedBlockCirculant,
    grid: &GridSpec,
    base: &SolverConfig,
    truth: Option<&GroundTruthModel>,
    opts: &GridOptions,
) -> Result<RunReport> {
    grid.validate()?;
    if sigma.period() != grid.period || sigma.bandwidth() != grid.order {
        return Err(Error::Dimension(format!(
            "Σ̂ has period {} and order {}, the grid expects {} and {}",
            sigma.period(),
            sigma.bandwidth(),
            grid.period,
            grid.order
        )));
    }
    if let Some(t) = truth {
        if t.m != sigma.m() {
            return Err(Error::Dimension(format!("ground truth has m = {}, data has m = {}", t.m, sigma.m())));
        }
    }
    let cells = grid.cells();
    let work = || -> Vec<CellRecord> {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &c)| run_cell(i, c, sigma, base, truth, opts))
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let report = RunReport { cells: pool.install(work) };
    for v in report.monotonicity_violations() {
        log::info!("support size not monotone in λ_S: {v}");
    }
    Ok(report)
}

/// `−log det X + ⟨Σ̂_test, X⟩`; `None` when `X` is not positive definite.
pub fn validation_score(x: &BandedBlockCirculant, sigma_test: &BandedBlockCirculant) -> Result<Option<f64>> {
    let inner = x.inner(sigma_test)?;
    Ok(x.logdet().ok().map(|ld| -ld + inner))
}

/// Scores every cell on the held-out series and returns the index of the
/// best one: minimum score, ties broken by fewer pairs, then fewer latent
/// variables, then grid order.
pub fn cross_validate(report: &mut RunReport, test: &TimeSeries, order: usize, period: usize) -> Result<Option<usize>> {
    if test.is_empty() {
        return Err(Error::Data("empty validation series".into()));
    }
    let sigma_test = build_sigma_hat(&estimate_lags(test, order)?, period)?.sigma;
    cross_validate_sigma(report, &sigma_test)
}

pub fn cross_validate_sigma(report: &mut RunReport, sigma_test: &BandedBlockCirculant) -> Result<Option<usize>> {
    let period = sigma_test.period();
    for cell in &mut report.cells {
        cell.score = match cell.estimate(period) {
            Some(x) => validation_score(&x?, sigma_test)?,
            None => None,
        };
    }
    let key = |c: &CellRecord| (c.score, c.pairs.unwrap_or(usize::MAX), c.latent_count.unwrap_or(usize::MAX));
    let best = report
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.score.is_some_and(f64::is_finite))
        .min_by(|(_, a), (_, b)| {
            let (ka, kb) = (key(a), key(b));
            ka.0.partial_cmp(&kb.0)
                .expect("finite scores")
                .then(ka.1.cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
        })
        .map(|(i, _)| i);
    Ok(best)
}
