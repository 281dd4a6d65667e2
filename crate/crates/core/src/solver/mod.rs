//! ADMM solver for the regularized maximum-entropy dual program and recovery
//! of the identified model.

mod admm;
mod config;
mod maxent;
mod recover;
mod spectrum;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant, SupportPattern};
use crate::error::{Error, Result};
use crate::regset::GroupBound;

pub use admm::{
    grad_i, m_update, p_update, primal_residual, residuals, rho_update, z_update, AdmmState, Residuals, ZSubproblem,
    ZUpdate,
};
pub use config::{Armijo, DualResidual, OutOfBand, SolverConfig};
pub use maxent::{maxent_solve, maxent_solve_with, MaxEntConfig};
pub use recover::{latent_eigenvalues, recover_latent_count, recover_support, LatentCount};
pub use spectrum::spectrum;

/// One row of the residual trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub rho: f64,
    pub step: f64,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `−log det(Σ̂ + Z_o) − mN`
    pub objective: f64,
    /// `‖Z − P_𝒵(Z − ∇𝓘(Z))‖` at the returned point.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub converged: bool,
    pub final_rho: f64,
    pub residuals: Option<Residuals>,
    /// Relative mass of `(Σ̂ + Z_o)⁻¹` beyond the bandwidth, removed by
    /// truncation.
    pub out_of_band_mass: f64,
    pub line_search_stalls: usize,
    /// Eigenvalues of `λ_L I + P_ℬ(Z_o)` below the kernel threshold divided
    /// by `N`, before rounding.
    pub latent_ratio: f64,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

/// Identified model.
#[derive(Debug, Clone)]
pub struct ModelEstimate {
    /// `X_o = S − L`
    pub x: BandedBlockCirculant,
    pub support: SupportPattern,
    pub latent_count: usize,
    pub z: BlockCirculant,
    pub diagnostics: Diagnostics,
}

/// Runs ADMM on the dual program from `Z = 0, P = λ_L I, M = 0` until the
/// stopping rule holds or `max_outer` iterations have been spent. Hitting the
/// cap is reported through `diagnostics.converged`, not as an error.
pub fn solve(sigma: &BandedBlockCirculant, config: &SolverConfig) -> Result<ModelEstimate> {
    config.validate()?;
    sigma.logdet()?;
    let start = Instant::now();
    let (m, period, n) = (sigma.m(), sigma.period(), sigma.bandwidth());

    let mut state = AdmmState::initial(m, period, config);
    let mut trace = Vec::new();
    let mut stalls = 0;
    let mut converged = false;

    while state.iteration < config.max_outer {
        let up = z_update(&state, sigma, config)?;
        if up.stalled {
            stalls += 1;
        }
        let p_next = p_update(&up.z, &state.m, state.rho, config.lambda_l, n)?;
        let m_next = m_update(&state.m, &p_next, &up.z, state.rho, config.lambda_l, n)?;
        let res = residuals(&up.z, &state.p, &p_next, &state.m, &m_next, state.rho, config, n)?;
        let at_cap = state.rho >= config.rho_max;

        state.z = up.z;
        state.p = p_next;
        state.m = m_next;
        state.iteration += 1;
        state.residuals = Some(res);
        state.last_step = up.step;
        if config.record_trace {
            trace.push(TraceEntry {
                iteration: state.iteration,
                rho: state.rho,
                step: up.step,
                residuals: res,
            });
        }
        if res.primal_ok() && res.dual_ok() && (at_cap || !config.require_rho_max) {
            converged = true;
            break;
        }
        state.rho = rho_update(state.rho, config.alpha, config.rho_max);
    }

    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("stopping rule not met after {} iterations", state.iteration));
    }
    if stalls > 0 {
        warnings.push(format!("line search stalled in {stalls} iterations"));
    }

    let (x_full, logdet_inv) = (&**sigma + &state.z).pd_inverse_logdet()?;
    let objective = -logdet_inv - (m * period) as f64;
    let outside = x_full.out_of_band(n).norm();
    let out_of_band_mass = outside / x_full.norm();
    if out_of_band_mass > config.band_tol {
        let msg = format!("out-of-band mass {out_of_band_mass:.3e} truncated from the inverse");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let x = x_full.project_banded(n)?;
    if x.logdet().is_err() {
        warnings.push("truncated X is not positive definite".into());
    }

    let kkt_residual = kkt_residual(&state, sigma, config)?;
    let support = recover_support(&state.z, config, n)?;
    let latent = recover_latent_count(&state.z, config.lambda_l, config, n)?;
    if let Some(w) = &latent.warning {
        warnings.push(w.clone());
    }
    for w in &warnings {
        log::debug!("{w}");
    }

    Ok(ModelEstimate {
        x,
        support,
        latent_count: latent.count,
        z: state.z.clone(),
        diagnostics: Diagnostics {
            objective,
            kkt_residual,
            iterations: state.iteration,
            wall_time_secs: start.elapsed().as_secs_f64(),
            converged,
            final_rho: state.rho,
            residuals: state.residuals,
            out_of_band_mass,
            line_search_stalls: stalls,
            latent_ratio: latent.ratio,
            trace,
            warnings,
        },
    })
}

/// Stationarity proxy `‖Z − P_𝒵(Z − ∇𝓘(Z))‖` of the Z-subproblem at the
/// current `(P, M, ρ)`.
pub fn kkt_residual(state: &AdmmState, sigma: &BandedBlockCirculant, config: &SolverConfig) -> Result<f64> {
    let n = sigma.bandwidth();
    let gb = GroupBound::new(config.lambda_s, sigma.period())?;
    let g = grad_i(&state.z, &state.p, &state.m, state.rho, sigma, config.lambda_l)?;
    let moved = admm::project_feasible(&state.z.axpy(-1.0, &g), &gb, n, config.out_of_band);
    Ok((&state.z - &moved).norm())
}

/// Dual objective `−log det(Σ̂ + Z) − mN`.
pub fn dual_objective(sigma: &BandedBlockCirculant, z: &BlockCirculant) -> Result<f64> {
    if z.m() != sigma.m() || z.period() != sigma.period() {
        return Err(Error::Dimension("Z and Σ̂ differ in shape".into()));
    }
    Ok(-(&**sigma + z).logdet()? - (sigma.m() * sigma.period()) as f64)
}

#[cfg(test)]
mod tests;
