//! ADMM iterations for the dual program
//!
//! ```text
//! min_Z  −log det(Σ̂ + Z) − mN
//! s.t.   Z ∈ 𝒵,  P = λ_L I + P_ℬ(Z),  P ⪰ 0
//! ```
//!
//! The Z-step is a projected-gradient step on the augmented Lagrangian
//! `𝓘(Z)`, the P-step a PSD projection, followed by the multiplier update.

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant, PdFactor};
use crate::error::{Error, Result};
use crate::regset::{project_z, GroupBound};

use super::config::{DualResidual, OutOfBand, SolverConfig};

/// Iterates of the solver.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub z: BlockCirculant,
    pub p: BlockCirculant,
    pub m: BlockCirculant,
    pub rho: f64,
    pub iteration: usize,
    pub residuals: Option<Residuals>,
    /// Step accepted by the last line search.
    pub last_step: f64,
}

impl AdmmState {
    /// `Z⁰ = 0`, `P⁰ = λ_L I`, `M⁰ = 0`.
    pub fn initial(m: usize, period: usize, config: &SolverConfig) -> Self {
        AdmmState {
            z: BlockCirculant::zeros(m, period),
            p: BlockCirculant::scaled_identity(m, period, config.lambda_l),
            m: BlockCirculant::zeros(m, period),
            rho: config.rho0,
            iteration: 0,
            residuals: None,
            last_step: config.armijo.initial_step,
        }
    }
}

/// Primal/dual residual norms and their tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    pub primal: f64,
    /// The dual residual selected by the configuration.
    pub dual: f64,
    pub dual_standard: f64,
    pub dual_multiplier: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

impl Residuals {
    pub fn primal_ok(&self) -> bool {
        self.primal <= self.eps_primal
    }

    pub fn dual_ok(&self) -> bool {
        self.dual <= self.eps_dual
    }
}

/// The Z-subproblem
/// `𝓘(Z) = −log det(Σ̂+Z) + ρ/2 ‖P_ℬ(Z)‖² + ⟨M − ρ(P − λ_L I), P_ℬ(Z)⟩`
/// for fixed `P`, `M` and `ρ`.
pub struct ZSubproblem<'a> {
    sigma: &'a BandedBlockCirculant,
    rho: f64,
    /// `P_ℬ(M − ρ(P − λ_L I))`
    linear: BlockCirculant,
    bandwidth: usize,
}

impl<'a> ZSubproblem<'a> {
    pub fn new(
        sigma: &'a BandedBlockCirculant,
        p: &BlockCirculant,
        m: &BlockCirculant,
        rho: f64,
        lambda_l: f64,
    ) -> Self {
        let bandwidth = sigma.bandwidth();
        let shifted = p.add_identity(-lambda_l);
        let linear = m
            .axpy(-rho, &shifted)
            .project_banded(bandwidth)
            .expect("bandwidth already validated")
            .into_inner();
        ZSubproblem {
            sigma,
            rho,
            linear,
            bandwidth,
        }
    }

    fn smooth_terms(&self, z: &BlockCirculant) -> f64 {
        let zb = z.project_banded(self.bandwidth).expect("validated").into_inner();
        0.5 * self.rho * zb.inner_unchecked(&zb) + self.linear.inner_unchecked(&zb)
    }

    /// `𝓘(Z)`; fails with `NotPositiveDefinite` outside the domain.
    pub fn value(&self, z: &BlockCirculant) -> Result<f64> {
        self.value_and_factor(z).map(|(v, _)| v)
    }

    /// `𝓘(Z)` together with the factorization of `Σ̂ + Z`, from which the
    /// gradient follows without refactoring.
    pub fn value_and_factor(&self, z: &BlockCirculant) -> Result<(f64, PdFactor)> {
        let f = (&**self.sigma + z).pd_factor()?;
        Ok((-f.logdet() + self.smooth_terms(z), f))
    }

    /// `∇𝓘(Z) = −(Σ̂+Z)⁻¹ + P_ℬ(M) + ρ P_ℬ(Z − P + λ_L I)`.
    pub fn gradient(&self, z: &BlockCirculant, factor: &PdFactor) -> Result<BlockCirculant> {
        let zb = z.project_banded(self.bandwidth).expect("validated").into_inner();
        let mut grad = self.linear.axpy(self.rho, &zb);
        grad -= &factor.inverse()?;
        Ok(grad)
    }

    pub fn value_and_gradient(&self, z: &BlockCirculant) -> Result<(f64, BlockCirculant)> {
        let (v, f) = self.value_and_factor(z)?;
        Ok((v, self.gradient(z, &f)?))
    }
}

/// `∇𝓘(Z)` at the given iterate.
pub fn grad_i(
    z: &BlockCirculant,
    p: &BlockCirculant,
    m: &BlockCirculant,
    rho: f64,
    sigma: &BandedBlockCirculant,
    lambda_l: f64,
) -> Result<BlockCirculant> {
    ZSubproblem::new(sigma, p, m, rho, lambda_l)
        .value_and_gradient(z)
        .map(|(_, g)| g)
}

/// Projection onto the Z-feasible set used by the solver: `𝒵`, intersected
/// with `ℬ` when out-of-band lags are pinned at zero.
pub(crate) fn project_feasible(
    z: &BlockCirculant,
    gb: &GroupBound,
    bandwidth: usize,
    mode: OutOfBand,
) -> BlockCirculant {
    let p = project_z(z, gb, bandwidth);
    match mode {
        OutOfBand::Free => p,
        OutOfBand::Zero => p.project_banded(bandwidth).expect("validated").into_inner(),
    }
}

/// Result of one Z-update.
#[derive(Debug, Clone)]
pub struct ZUpdate {
    pub z: BlockCirculant,
    /// `𝓘` before and after every accepted step.
    pub values: Vec<f64>,
    pub step: f64,
    pub backtracks: usize,
    /// The line search hit `min_step`; `z` is the last accepted iterate.
    pub stalled: bool,
}

/// Projected-gradient steps on `𝓘` with Armijo backtracking along the
/// projection arc. A trial is accepted when `Σ̂ + Z_trial ≻ 0` and
/// `𝓘(Z_trial) ≤ 𝓘(Z) − (c/t)‖Z_trial − Z‖²`.
pub fn z_update(state: &AdmmState, sigma: &BandedBlockCirculant, config: &SolverConfig) -> Result<ZUpdate> {
    let gb = GroupBound::new(config.lambda_s, sigma.period())?;
    let bandwidth = sigma.bandwidth();
    let sub = ZSubproblem::new(sigma, &state.p, &state.m, state.rho, config.lambda_l);
    let ls = &config.armijo;

    let mut z = state.z.clone();
    let (mut value, mut grad) = sub.value_and_gradient(&z)?;
    let mut values = vec![value];
    let mut step = if ls.warm_start {
        (state.last_step / ls.beta).min(ls.initial_step)
    } else {
        ls.initial_step
    };
    let mut backtracks = 0;
    let mut stalled = false;

    for inner in 0..config.inner_max {
        let mut t = step;
        let accepted = loop {
            if t < ls.min_step {
                break None;
            }
            let trial = project_feasible(&z.axpy(-t, &grad), &gb, bandwidth, config.out_of_band);
            let moved = (&trial - &z).norm();
            if moved <= 1e-12 * z.norm().max(1.0) {
                break Some((trial, value, None));
            }
            match sub.value_and_factor(&trial) {
                Ok((v, f)) if v <= value - ls.c / t * moved * moved => break Some((trial, v, Some(f))),
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => {
                    t *= ls.beta;
                    backtracks += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let Some((trial, v, factor)) = accepted else {
            stalled = true;
            break;
        };
        step = t;
        z = trial;
        values.push(v);
        let Some(factor) = factor else {
            break;
        };
        if inner + 1 == config.inner_max {
            break;
        }
        value = v;
        grad = sub.gradient(&z, &factor)?;
        if ls.warm_start {
            t = (t / ls.beta).min(ls.initial_step);
            step = t;
        }
    }
    if stalled {
        log::warn!("Z-update line search stalled at iteration {}", state.iteration);
    }
    Ok(ZUpdate {
        z,
        values,
        step,
        backtracks,
        stalled,
    })
}

/// `P^{k+1} = P_{𝒞⁺}(M/ρ + λ_L I + P_ℬ(Z^{k+1}))`.
pub fn p_update(z: &BlockCirculant, m: &BlockCirculant, rho: f64, lambda_l: f64, bandwidth: usize) -> Result<BlockCirculant> {
    let zb = z.project_banded(bandwidth)?.into_inner();
    let candidate = zb.axpy(1.0 / rho, m).add_identity(lambda_l);
    Ok(candidate.psd_project())
}

/// `M^{k+1} = M − ρ(P − λ_L I − P_ℬ(Z))`.
pub fn m_update(
    m: &BlockCirculant,
    p: &BlockCirculant,
    z: &BlockCirculant,
    rho: f64,
    lambda_l: f64,
    bandwidth: usize,
) -> Result<BlockCirculant> {
    let r = primal_residual(p, z, lambda_l, bandwidth)?;
    Ok(m.axpy(-rho, &r))
}

/// `ρ^{k+1} = min(αρ^k, ρ_max)`.
pub fn rho_update(rho: f64, alpha: f64, rho_max: f64) -> f64 {
    (alpha * rho).min(rho_max)
}

/// `r = P − λ_L I − P_ℬ(Z)`.
pub fn primal_residual(p: &BlockCirculant, z: &BlockCirculant, lambda_l: f64, bandwidth: usize) -> Result<BlockCirculant> {
    let zb = z.project_banded(bandwidth)?.into_inner();
    Ok((p - &zb).add_identity(-lambda_l))
}

/// Residual norms after an iteration that moved `(P^k, M^k)` to
/// `(P^{k+1}, M^{k+1})` with penalty `ρ^k`:
///
/// * `r = P^{k+1} − λ_L I − P_ℬ(Z^{k+1})`
/// * `s = ρ^k P_ℬ(P^{k+1} − P^k)`, or in the `Multiplier` form
///   `s = P_{ℬᶜ}(M^k) − ρ^k (P^{k+1} − P_ℬ(P^k))`
/// * `ε^p = mN ε_abs + ε_rel max{λ_L √(mN), ‖Z‖, ‖P‖}`
/// * `ε^d = mN ε_abs + ε_rel ‖M‖`
#[allow(clippy::too_many_arguments)]
pub fn residuals(
    z_next: &BlockCirculant,
    p_prev: &BlockCirculant,
    p_next: &BlockCirculant,
    m_prev: &BlockCirculant,
    m_next: &BlockCirculant,
    rho: f64,
    config: &SolverConfig,
    bandwidth: usize,
) -> Result<Residuals> {
    let mn = (z_next.m() * z_next.period()) as f64;
    let r = primal_residual(p_next, z_next, config.lambda_l, bandwidth)?;
    let p_prev_band = p_prev.project_banded(bandwidth)?.into_inner();
    let s = m_prev.out_of_band(bandwidth).axpy(-rho, &(p_next - &p_prev_band));
    let dp = (p_next - p_prev).project_banded(bandwidth)?.into_inner();
    let eps_primal = mn * config.eps_abs
        + config.eps_rel * (config.lambda_l * mn.sqrt()).max(z_next.norm()).max(p_next.norm());
    let eps_dual = mn * config.eps_abs + config.eps_rel * m_next.norm();
    let (dual_standard, dual_multiplier) = (rho * dp.norm(), s.norm());
    Ok(Residuals {
        primal: r.norm(),
        dual: match config.dual_residual {
            DualResidual::Standard => dual_standard,
            DualResidual::Multiplier => dual_multiplier,
        },
        dual_standard,
        dual_multiplier,
        eps_primal,
        eps_dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regset::{z_feasible, FEASIBILITY_TOL};
    use crate::testutil::{random_bc, random_pd, rng};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn banded(c: BlockCirculant, n: usize) -> BandedBlockCirculant {
        c.project_banded(n).unwrap()
    }

    #[test]
    fn gradient_reduces_to_inverse() {
        let sigma = banded(BlockCirculant::identity(2, 4), 1);
        let zero = BlockCirculant::zeros(2, 4);
        let g = grad_i(&zero, &zero, &zero, 1.0, &sigma, 0.0).unwrap();
        assert!((&g + &BlockCirculant::identity(2, 4)).amax() < 1e-14);
    }

    #[test]
    fn gradient_by_substitution() {
        let sigma = banded(BlockCirculant::scaled_identity(2, 4, 2.0), 1);
        let zero = BlockCirculant::zeros(2, 4);
        let g = grad_i(&zero, &zero, &zero, 2.0, &sigma, 1.0).unwrap();
        assert!((&g - &BlockCirculant::scaled_identity(2, 4, 1.5)).amax() < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = rng(31);
        let (m, period, n) = (2, 4, 1);
        for _ in 0..5 {
            let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
            let gb = GroupBound::new(2.0, period).unwrap();
            let z = project_z(&random_bc(&mut r, m, period, None).scale(0.2), &gb, n);
            let p = random_bc(&mut r, m, period, None);
            let mm = random_bc(&mut r, m, period, None);
            let rho = r.random_range(0.5..3.0);
            let sub = ZSubproblem::new(&sigma, &p, &mm, rho, 0.7);
            let (_, g) = sub.value_and_gradient(&z).unwrap();
            let d = random_bc(&mut r, m, period, None);
            let h = 1e-6;
            let fd = (sub.value(&z.axpy(h, &d)).unwrap() - sub.value(&z.axpy(-h, &d)).unwrap()) / (2.0 * h);
            let an = g.inner(&d).unwrap();
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn p_update_examples() {
        let zero = BlockCirculant::zeros(2, 4);
        let p = p_update(&zero, &zero, 1.0, 1.0, 1).unwrap();
        assert_eq!(p, BlockCirculant::identity(2, 4));

        let mut r = rng(32);
        let m = random_bc(&mut r, 2, 4, None).scale(5.0);
        let p = p_update(&zero, &m, 1.0, 0.1, 1).unwrap();
        assert!(p.eig().min() > -1e-12);
        // already PSD candidate passes through
        let m = random_pd(&mut r, 2, 4, None);
        let p = p_update(&zero, &m, 2.0, 0.5, 1).unwrap();
        let want = m.scale(0.5).add_identity(0.5);
        assert!((&p - &want).amax() < 1e-10);
    }

    #[test]
    fn multiplier_and_penalty_updates() {
        let mut r = rng(33);
        let z = random_bc(&mut r, 2, 6, Some(2));
        let m = random_bc(&mut r, 2, 6, None);
        let p = z.project_banded(2).unwrap().into_inner().add_identity(0.3);
        let next = m_update(&m, &p, &z, 5.0, 0.3, 2).unwrap();
        assert!((&next - &m).amax() < 1e-14);

        let mut rho = 1.0;
        for _ in 0..3 {
            rho = rho_update(rho, 1.007, 1e4);
        }
        assert!((rho - 1.007f64.powi(3)).abs() < 1e-15);
        assert_eq!(rho_update(1e4, 1.007, 1e4), 1e4);
        assert_eq!(rho_update(9999.0, 1.007, 1e4), 1e4);
    }

    #[test]
    fn residual_examples() {
        let mut config = SolverConfig::new(95.0, 1.0);
        let id = BlockCirculant::identity(1, 4);
        let zero = BlockCirculant::zeros(1, 4);
        let res = residuals(&zero, &id, &id, &zero, &zero, 1.0, &config, 1).unwrap();
        assert_eq!(res.primal, 0.0);
        assert_eq!(res.dual, 0.0);

        // ε^p with Z = P = 0, m = 20, N = 30
        config.lambda_l = 5.4;
        let zero = BlockCirculant::zeros(20, 30);
        let res = residuals(&zero, &zero, &zero, &zero, &zero, 1.0, &config, 8).unwrap();
        let want = 600.0 * config.eps_abs + config.eps_rel * 5.4 * 600f64.sqrt();
        assert!((res.eps_primal - want).abs() < 1e-15);
        assert!((res.eps_dual - 600.0 * config.eps_abs).abs() < 1e-15);
    }

    #[test]
    fn dual_residual_formula() {
        let mut r = rng(34);
        let (period, n) = (8, 1);
        let z = random_bc(&mut r, 2, period, None);
        let p0 = random_bc(&mut r, 2, period, None);
        let p1 = random_bc(&mut r, 2, period, None);
        let m0 = random_bc(&mut r, 2, period, None);
        let m1 = random_bc(&mut r, 2, period, None);
        let config = SolverConfig::new(1.0, 1.0);
        let res = residuals(&z, &p0, &p1, &m0, &m1, 3.0, &config, n).unwrap();
        // assembled from the dense definition of each piece
        let mut s = m0.clone();
        for j in 0..=n {
            s = s.axpy(-1.0, &BlockCirculant::new(period, {
                let mut b = vec![DMatrix::zeros(2, 2); period / 2 + 1];
                b[j] = m0.block(j).clone();
                b
            }).unwrap());
        }
        let mut pb = p0.clone();
        for j in n + 1..=period / 2 {
            let mut b = vec![DMatrix::zeros(2, 2); period / 2 + 1];
            b[j] = p0.block(j).clone();
            pb = pb.axpy(-1.0, &BlockCirculant::new(period, b).unwrap());
        }
        let s = s.axpy(-3.0, &(&p1 - &pb));
        assert!((res.dual_multiplier - s.norm()).abs() < 1e-12);
        let dp = (&p1 - &p0).project_banded(n).unwrap();
        assert!((res.dual - 3.0 * dp.norm()).abs() < 1e-12);
    }

    #[test]
    fn z_update_fixed_point_and_monotone() {
        let mut r = rng(35);
        let (m, period, n) = (2, 4, 1);
        let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
        let config = SolverConfig {
            inner_max: 200,
            ..SolverConfig::new(1.0, 1.0)
        };
        let state = AdmmState::initial(m, period, &config);
        let up = z_update(&state, &sigma, &config).unwrap();
        for w in up.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let gb = GroupBound::new(config.lambda_s, period).unwrap();
        assert!(z_feasible(&up.z, &gb, n, FEASIBILITY_TOL));

        // restarting from the converged point does not move it
        let again = AdmmState { z: up.z.clone(), ..state };
        let one = SolverConfig { inner_max: 1, ..config };
        let fixed = z_update(&again, &sigma, &one).unwrap();
        assert!((&fixed.z - &up.z).norm() <= 1e-6);
    }
}
