//! Reading the support and the latent count off the dual optimum.

use serde::{Deserialize, Serialize};

use crate::blockcirc::{BlockCirculant, SupportPattern};
use crate::error::Result;
use crate::regset::{group_sum, GroupBound};

use super::config::SolverConfig;

/// Pairs whose group constraint is active,
/// `group_sum ≥ (1 − support_tol) λ_S / N`, plus the diagonal.
pub fn recover_support(z: &BlockCirculant, config: &SolverConfig, bandwidth: usize) -> Result<SupportPattern> {
    let gb = GroupBound::new(config.lambda_s, z.period())?;
    let threshold = (1.0 - config.support_tol) * gb.bound();
    let m = z.m();
    let mut support = SupportPattern::diagonal(m);
    for h in 0..m {
        for k in h + 1..m {
            if group_sum(z, bandwidth, h, k) >= threshold {
                support.insert(h, k);
            }
        }
    }
    Ok(support)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCount {
    pub count: usize,
    /// Kernel dimension divided by `N`.
    pub ratio: f64,
    pub warning: Option<String>,
}

/// Eigenvalues of `V = λ_L I + P_ℬ(Z)` over all frequencies.
pub fn latent_eigenvalues(z: &BlockCirculant, lambda_l: f64, bandwidth: usize) -> Result<Vec<f64>> {
    let v = z.project_banded(bandwidth)?.into_inner().add_identity(lambda_l);
    Ok(v.eig().spectrum())
}

/// `l̂ = #{eigenvalues of λ_L I + P_ℬ(Z) below kernel_tol · λ_L} / N`,
/// rounded; a ratio more than 0.25 away from an integer carries a warning.
pub fn recover_latent_count(
    z: &BlockCirculant,
    lambda_l: f64,
    config: &SolverConfig,
    bandwidth: usize,
) -> Result<LatentCount> {
    let threshold = config.kernel_tol * lambda_l;
    let kernel = latent_eigenvalues(z, lambda_l, bandwidth)?
        .into_iter()
        .filter(|&v| v < threshold)
        .count();
    let ratio = kernel as f64 / z.period() as f64;
    let count = (ratio.round() as usize).min(z.m());
    let warning = ((ratio - ratio.round()).abs() > 0.25)
        .then(|| format!("kernel dimension {kernel} is not close to a multiple of N = {}", z.period()));
    Ok(LatentCount { count, ratio, warning })
}
