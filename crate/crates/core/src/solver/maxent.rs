//! Maximum-entropy covariance extension without regularization:
//! `min −log det X + ⟨X, Σ̂⟩` over banded `X ≻ 0`.

use serde::{Deserialize, Serialize};

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant};
use crate::error::{Error, Result};

use super::config::Armijo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxEntConfig {
    /// Stop once `‖P_ℬ(X⁻¹) − Σ̂‖ ≤ tol · ‖Σ̂‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: Armijo,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        MaxEntConfig {
            tol: 1e-8,
            max_iter: 20_000,
            armijo: Armijo::default(),
        }
    }
}

fn objective(x: &BlockCirculant, sigma: &BlockCirculant) -> Result<f64> {
    Ok(-x.logdet()? + x.inner_unchecked(sigma))
}

/// Gradient `Σ̂ − P_ℬ(X⁻¹)` within the band.
fn gradient(x: &BlockCirculant, sigma: &BandedBlockCirculant) -> Result<(f64, BlockCirculant)> {
    let (inv, ld) = x.pd_inverse_logdet()?;
    let g = &**sigma - &inv.project_banded(sigma.bandwidth())?.into_inner();
    Ok((-ld + x.inner_unchecked(sigma), g))
}

pub fn maxent_solve(sigma: &BandedBlockCirculant) -> Result<BandedBlockCirculant> {
    maxent_solve_with(sigma, &MaxEntConfig::default())
}

/// Projected gradient on the band with Barzilai–Borwein trial steps and
/// Armijo backtracking. Starts from `P_ℬ(Σ̂⁻¹)` when that is positive
/// definite, otherwise from a scaled identity.
pub fn maxent_solve_with(sigma: &BandedBlockCirculant, config: &MaxEntConfig) -> Result<BandedBlockCirculant> {
    sigma.logdet()?;
    let n = sigma.bandwidth();
    let scale = sigma.norm();
    let ls = &config.armijo;

    let guess = sigma.inverse()?.project_banded(n)?.into_inner();
    let mut x = if guess.logdet().is_ok() {
        guess
    } else {
        BlockCirculant::scaled_identity(sigma.m(), sigma.period(), 1.0 / sigma.eig().max())
    };
    let (mut f, mut g) = gradient(&x, sigma)?;
    let mut step = ls.initial_step;

    for _ in 0..config.max_iter {
        let gn = g.norm();
        if gn <= config.tol * scale {
            return x.project_banded(n);
        }
        let mut t = step;
        let (x_new, f_new) = loop {
            if t < ls.min_step {
                return Err(Error::LineSearchStalled { step: t });
            }
            let trial = x.axpy(-t, &g);
            match objective(&trial, sigma) {
                Ok(v) if v <= f - ls.c * t * gn * gn => break (trial, v),
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => t *= ls.beta,
                Err(e) => return Err(e),
            }
        };
        let (_, g_new) = gradient(&x_new, sigma)?;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.inner_unchecked(&y);
        step = if sy > 0.0 {
            (s.inner_unchecked(&s) / sy).clamp(1e-10, 1e10)
        } else {
            ls.initial_step
        };
        x = x_new;
        f = f_new;
        g = g_new;
    }
    Err(Error::MaxIterations {
        iterations: config.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_pd, rng};
    use nalgebra::DMatrix;

    fn moment_gap(x: &BandedBlockCirculant, sigma: &BandedBlockCirculant) -> f64 {
        let xi = x.inverse().unwrap().project_banded(sigma.bandwidth()).unwrap();
        (&**sigma - &*xi).norm() / sigma.norm()
    }

    #[test]
    fn identity_is_fixed() {
        let s = BlockCirculant::identity(2, 6).project_banded(1).unwrap();
        let x = maxent_solve(&s).unwrap();
        assert!((&*x - &BlockCirculant::identity(2, 6)).amax() < 1e-12);
    }

    #[test]
    fn zero_order_inverts_lag_zero() {
        let mut r = rng(51);
        let s0 = random_pd(&mut r, 3, 2, Some(0)).block(0).clone();
        let s = BandedBlockCirculant::from_lags(8, &[s0.clone()]).unwrap();
        let x = maxent_solve(&s).unwrap();
        let want = s0.try_inverse().unwrap();
        assert!((x.block(0) - want).amax() < 1e-10);
    }

    #[test]
    fn scalar_ar1_moments_match() {
        // stationary AR(1) lags r_k = a^k / (1 − a²)
        let a: f64 = 0.3;
        let r0 = 1.0 / (1.0 - a * a);
        let s = BandedBlockCirculant::from_lags(8, &[DMatrix::from_element(1, 1, r0), DMatrix::from_element(1, 1, a * r0)])
            .unwrap();
        let x = maxent_solve(&s).unwrap();
        assert!(moment_gap(&x, &s) <= 1e-5);
    }

    #[test]
    fn random_moment_matching() {
        let mut r = rng(52);
        for (m, n, period) in [(2, 1, 6), (3, 2, 8), (3, 2, 16), (1, 2, 10)] {
            let s = random_pd(&mut r, m, period, Some(n)).project_banded(n).unwrap();
            let x = maxent_solve(&s).unwrap();
            assert!(x.logdet().is_ok());
            assert!(moment_gap(&x, &s) <= 1e-5, "m={m} n={n} N={period}");
        }
    }
}
