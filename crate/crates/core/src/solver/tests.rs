use nalgebra::DMatrix;

use super::*;
use crate::regset::{h_inf, z_feasible, FEASIBILITY_TOL};
use crate::testutil::{random_bc, random_pd, rng};

fn banded(c: BlockCirculant, n: usize) -> BandedBlockCirculant {
    c.project_banded(n).unwrap()
}

fn tight(lambda_s: f64, lambda_l: f64) -> SolverConfig {
    SolverConfig {
        eps_abs: 1e-9,
        eps_rel: 1e-8,
        max_outer: 20_000,
        out_of_band: OutOfBand::Free,
        ..SolverConfig::new(lambda_s, lambda_l)
    }
}

#[test]
fn zero_order_diagonal_solution() {
    let s0 = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0]);
    let sigma = BandedBlockCirculant::from_lags(4, &[s0]).unwrap();
    let est = solve(&sigma, &SolverConfig::new(1e6, 1e3)).unwrap();
    assert!(est.diagnostics.converged);
    let want = DMatrix::from_diagonal(&nalgebra::dvector![0.5, 1.0 / 3.0]);
    assert!((est.x.block(0) - want).amax() < 1e-6);
    assert_eq!(est.latent_count, 0);
}

#[test]
fn returned_state_meets_the_certificate() {
    let mut r = rng(61);
    let (m, n, period) = (3, 1, 8);
    let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
    let config = SolverConfig::new(0.5, 0.3);
    let est = solve(&sigma, &config).unwrap();
    let d = &est.diagnostics;
    assert!(d.converged, "{:?}", d.warnings);
    let res = d.residuals.unwrap();
    assert!(res.primal <= res.eps_primal && res.dual <= res.eps_dual);
    let gb = GroupBound::new(config.lambda_s, period).unwrap();
    assert!(z_feasible(&est.z, &gb, n, FEASIBILITY_TOL));
    assert!((&*sigma + &est.z).logdet().is_ok());
    assert!((d.objective - dual_objective(&sigma, &est.z).unwrap()).abs() < 1e-10);
    assert!(d.trace.len() == d.iterations);
    assert!(d.kkt_residual < 1e-4, "kkt {}", d.kkt_residual);
}

#[test]
fn tiny_lambda_s_limits() {
    let mut r = rng(62);
    let (m, n, period) = (2, 1, 6);
    let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);

    // with Z pinned to the band, Z → 0 and X_o → P_ℬ(Σ̂⁻¹)
    let pinned = SolverConfig {
        out_of_band: OutOfBand::Zero,
        ..SolverConfig::new(1e-6, 1.0)
    };
    let est = solve(&sigma, &pinned).unwrap();
    assert!(est.z.norm() < 1e-5);
    let want = sigma.inverse().unwrap().project_banded(n).unwrap();
    assert!((&*est.x - &*want).norm() <= 1e-3);
    // every group is pinned at the tiny bound, so every pair reads as active
    assert_eq!(est.support, SupportPattern::full(m));

    // with free out-of-band lags the in-band part still vanishes and X_o
    // tends to the maximum-entropy extension
    let est = solve(&sigma, &SolverConfig::new(1e-6, 1.0)).unwrap();
    assert!(est.z.project_banded(n).unwrap().norm() < 1e-5);
    assert!(est.diagnostics.out_of_band_mass < 1e-4);
    let me = maxent_solve(&sigma).unwrap();
    assert!((&*est.x - &*me).norm() <= 1e-3 * me.norm());
}

#[test]
fn huge_lambdas_reach_stationarity() {
    let mut r = rng(63);
    for seed in 0..3 {
        let _ = seed;
        let (m, n, period) = (2, 1, 8);
        let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
        let est = solve(&sigma, &SolverConfig::new(1e6, 1e6)).unwrap();
        assert!(est.diagnostics.kkt_residual <= 1e-4, "{}", est.diagnostics.kkt_residual);
        // unconstrained within the band: (Σ̂+Z)⁻¹ has zero off-diagonal
        // entries at every constrained position
        let x = &est.x;
        for j in 0..=n {
            let b = x.block(j);
            assert!(b[(0, 1)].abs() < 1e-3 && b[(1, 0)].abs() < 1e-3, "{b}");
        }
    }
}

#[test]
fn duality_gap_closes() {
    let mut r = rng(64);
    let (m, n, period) = (2, 1, 6);
    let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
    let lambda_s = 0.3;
    let est = solve(&sigma, &tight(lambda_s, 1e3)).unwrap();
    assert!(est.diagnostics.converged);
    assert_eq!(est.latent_count, 0);
    // primal value at (X_o, L = 0)
    let x = &est.x;
    let primal = -x.logdet().unwrap() + x.inner(&sigma).unwrap() + lambda_s * h_inf(x);
    let gap = primal + est.diagnostics.objective;
    assert!(gap.abs() <= 1e-4, "gap {gap} {:?}", est.diagnostics.warnings);
}

#[test]
fn z_subproblem_is_monotone_over_a_solve() {
    let mut r = rng(65);
    let (m, n, period) = (3, 1, 8);
    let sigma = banded(random_pd(&mut r, m, period, Some(n)), n);
    let config = SolverConfig {
        inner_max: 3,
        ..SolverConfig::new(0.4, 0.2)
    };
    let mut state = AdmmState::initial(m, period, &config);
    for _ in 0..200 {
        let up = z_update(&state, &sigma, &config).unwrap();
        for w in up.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        let p = p_update(&up.z, &state.m, state.rho, config.lambda_l, n).unwrap();
        state.m = m_update(&state.m, &p, &up.z, state.rho, config.lambda_l, n).unwrap();
        state.p = p;
        state.z = up.z;
        state.rho = rho_update(state.rho, config.alpha, config.rho_max);
    }
}

#[test]
fn support_recovery_rules() {
    let config = SolverConfig::new(8.0, 1.0);
    let zero = BlockCirculant::zeros(3, 4);
    assert_eq!(recover_support(&zero, &config, 1).unwrap(), SupportPattern::diagonal(3));

    // bound λ_S/N = 2: 2·|z0| = 2 puts pair (0, 2) exactly on it
    let mut b0 = DMatrix::zeros(3, 3);
    b0[(0, 2)] = 1.0;
    b0[(2, 0)] = 1.0;
    b0[(0, 1)] = 0.5;
    b0[(1, 0)] = 0.5;
    let z = BlockCirculant::new(4, vec![b0, DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)]).unwrap();
    let s = recover_support(&z, &config, 1).unwrap();
    assert!(s.contains(0, 2) && s.contains(2, 0));
    assert!(!s.contains(0, 1));
    assert_eq!(s.num_upper_pairs(), 1);
}

#[test]
fn latent_count_rules() {
    let config = SolverConfig::new(1.0, 2.0);
    let zero = BlockCirculant::zeros(3, 6);
    let lc = recover_latent_count(&zero, 2.0, &config, 1).unwrap();
    assert_eq!((lc.count, lc.warning.is_none()), (0, true));

    // P_ℬ(Z) = −λ_L e₀e₀ᵀ at lag 0: one zero eigenvalue per frequency
    let mut b0 = DMatrix::zeros(3, 3);
    b0[(0, 0)] = -2.0;
    let mut blocks = vec![DMatrix::zeros(3, 3); 4];
    blocks[0] = b0;
    let z = BlockCirculant::new(6, blocks).unwrap();
    let lc = recover_latent_count(&z, 2.0, &config, 1).unwrap();
    assert_eq!(lc.count, 1);
    assert!((lc.ratio - 1.0).abs() < 1e-15);

    // a kernel of size N/2 is ambiguous
    let mut r = rng(66);
    let _ = random_bc(&mut r, 1, 4, None);
    let mut blocks = vec![DMatrix::zeros(1, 1); 4];
    blocks[0][(0, 0)] = -1.0;
    blocks[1][(0, 0)] = -0.5;
    // symbol 1 − 1 − cos(2πk/6): k = 0 gives −1, k = ±1 give −0.5 ... only
    // frequencies with cos ≥ 0 reach the kernel
    let z = BlockCirculant::new(6, blocks).unwrap();
    let lc = recover_latent_count(&z, 1.0, &SolverConfig::new(1.0, 1.0), 1).unwrap();
    assert!(lc.ratio > 0.0 && lc.ratio < 1.0);
}

#[test]
fn rejects_indefinite_sigma() {
    let sigma = BlockCirculant::scaled_identity(2, 4, -1.0).project_banded(1).unwrap();
    assert!(matches!(
        solve(&sigma, &SolverConfig::default()),
        Err(Error::NotPositiveDefinite { .. })
    ));
    let bad = SolverConfig {
        alpha: 0.5,
        ..SolverConfig::default()
    };
    let sigma = BlockCirculant::identity(2, 4).project_banded(1).unwrap();
    assert!(matches!(solve(&sigma, &bad), Err(Error::Config(_))));
}

#[test]
fn iteration_cap_is_a_flag() {
    let mut r = rng(67);
    let sigma = banded(random_pd(&mut r, 2, 6, Some(1)), 1);
    let config = SolverConfig {
        max_outer: 5,
        ..SolverConfig::new(0.5, 0.5)
    };
    let est = solve(&sigma, &config).unwrap();
    assert!(!est.diagnostics.converged);
    assert_eq!(est.diagnostics.iterations, 5);
    assert!(!est.diagnostics.warnings.is_empty());
}

