use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backtracking line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Armijo {
    /// Initial trial step.
    pub initial_step: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Sufficient-decrease slope parameter.
    pub c: f64,
    /// Give up once the step falls below this.
    pub min_step: f64,
    /// Start each search from twice the last accepted step (capped at
    /// `initial_step`) instead of from `initial_step`.
    pub warm_start: bool,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            initial_step: 1.0,
            beta: 0.5,
            c: 1e-4,
            min_step: 1e-14,
            warm_start: true,
        }
    }
}

/// Treatment of the dual variable's lags beyond the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutOfBand {
    /// Out-of-band lags are optimized freely, so that `(Σ̂ + Z)⁻¹` becomes
    /// banded at the optimum (maximum-entropy completion).
    #[default]
    Free,
    /// Out-of-band lags of `Z` stay at zero: `Z ∈ ℬ`. This solves a
    /// restricted dual whose inverse is not banded.
    Zero,
}

/// Dual residual used by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DualResidual {
    /// `ρ^k P_ℬ(P^{k+1} − P^k)`.
    #[default]
    Standard,
    /// `P_{ℬᶜ}(M^k) − ρ^k (P^{k+1} − P_ℬ(P^k))`. Its out-of-band part equals
    /// `P_{ℬᶜ}(M^{k+1})`, which does not vanish once the PSD constraint on
    /// `P` is active, so with a latent component this never gets small.
    Multiplier,
}

/// Parameters of the ADMM solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda_s: f64,
    pub lambda_l: f64,
    pub rho0: f64,
    /// Penalty growth factor per outer iteration.
    pub alpha: f64,
    pub rho_max: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_outer: usize,
    /// Projected-gradient steps per Z-update.
    pub inner_max: usize,
    pub armijo: Armijo,
    /// Relative activity threshold for support recovery.
    pub support_tol: f64,
    /// Relative eigenvalue threshold (times `λ_L`) for the latent count.
    pub kernel_tol: f64,
    /// Require `ρ = ρ_max` before declaring convergence.
    pub require_rho_max: bool,
    pub out_of_band: OutOfBand,
    pub dual_residual: DualResidual,
    /// Relative out-of-band mass of `(Σ̂ + Z)⁻¹` tolerated before truncation
    /// without a warning.
    pub band_tol: f64,
    /// Keep a per-iteration residual trace in the diagnostics.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_s: 1.0,
            lambda_l: 1.0,
            rho0: 1.0,
            alpha: 1.007,
            rho_max: 1e4,
            eps_abs: 1e-5,
            eps_rel: 1e-4,
            max_outer: 5000,
            inner_max: 1,
            armijo: Armijo::default(),
            support_tol: 1e-6,
            kernel_tol: 1e-6,
            require_rho_max: true,
            out_of_band: OutOfBand::default(),
            dual_residual: DualResidual::default(),
            band_tol: 1e-6,
            record_trace: true,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda_s: f64, lambda_l: f64) -> Self {
        SolverConfig {
            lambda_s,
            lambda_l,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_s", self.lambda_s),
            ("lambda_l", self.lambda_l),
            ("rho0", self.rho0),
            ("rho_max", self.rho_max),
            ("support_tol", self.support_tol),
            ("kernel_tol", self.kernel_tol),
            ("band_tol", self.band_tol),
            ("armijo.initial_step", self.armijo.initial_step),
            ("armijo.c", self.armijo.c),
            ("armijo.min_step", self.armijo.min_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Config(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        for (name, v) in [("eps_abs", self.eps_abs), ("eps_rel", self.eps_rel)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.armijo.beta > 0.0 && self.armijo.beta < 1.0) {
            return Err(Error::Config("armijo.beta must lie in (0, 1)".into()));
        }
        if self.rho0 > self.rho_max {
            return Err(Error::Config("rho0 exceeds rho_max".into()));
        }
        if self.max_outer == 0 || self.inner_max == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        Ok(())
    }
}
