//! The group regularizer `h∞` and its dual feasible set `𝒵`.
//!
//! For every off-diagonal pair `(h, k)` the coefficients of `S` at that pair
//! across lags `−n..n` form one group; `h∞` sums a weighted max over each
//! group. Its dual ball is
//!
//! ```text
//! 𝒵 = { Z : diag(Z_j) = 0 (j ≤ n),
//!           2|(Z_0)_{hk}| + Σ_{j=1..n} |(Z_j)_{hk}| + |(Z_j)_{kh}| ≤ λ_S / N }
//! ```
//!
//! which is separable across pairs, so the Euclidean projection onto `𝒵`
//! reduces to one weighted-ℓ1-ball projection per pair.

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant};
use crate::error::{Error, Result};

/// Default feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Per-pair bound `λ_S / N` of the dual constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupBound {
    lambda_s: f64,
    period: usize,
}

impl GroupBound {
    pub fn new(lambda_s: f64, period: usize) -> Result<Self> {
        if !(lambda_s > 0.0) || !lambda_s.is_finite() || period == 0 {
            return Err(Error::Config(format!(
                "group bound needs λ_S > 0 and N > 0 (got {lambda_s}, {period})"
            )));
        }
        Ok(GroupBound { lambda_s, period })
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn bound(&self) -> f64 {
        self.lambda_s / self.period as f64
    }
}

/// `h∞(S) = Σ_{h<k} max{ |(S_0)_{hk}|, 2 max_j |(S_j)_{hk}|, 2 max_j |(S_j)_{kh}| }`.
pub fn h_inf(s: &BandedBlockCirculant) -> f64 {
    let m = s.m();
    let lags = s.lags();
    let mut total = 0.0;
    for h in 0..m {
        for k in h + 1..m {
            let mut g = lags[0][(h, k)].abs();
            for l in &lags[1..] {
                g = g.max(2.0 * l[(h, k)].abs()).max(2.0 * l[(k, h)].abs());
            }
            total += g;
        }
    }
    total
}

/// Constraint value `2|(Z_0)_{hk}| + Σ_j |(Z_j)_{hk}| + |(Z_j)_{kh}|` of one pair.
pub fn group_sum(z: &BlockCirculant, bandwidth: usize, h: usize, k: usize) -> f64 {
    let b = z.blocks();
    let mut s = 2.0 * b[0][(h, k)].abs();
    for l in &b[1..=bandwidth] {
        s += l[(h, k)].abs() + l[(k, h)].abs();
    }
    s
}

/// Membership in `𝒵` up to `tol`. Lags beyond the bandwidth are unconstrained.
pub fn z_feasible(z: &BlockCirculant, gb: &GroupBound, bandwidth: usize, tol: f64) -> bool {
    let m = z.m();
    let blocks = z.blocks();
    if bandwidth >= blocks.len() {
        return false;
    }
    for b in &blocks[..=bandwidth] {
        if (0..m).any(|i| b[(i, i)].abs() > tol) {
            return false;
        }
    }
    let bound = gb.bound() + tol;
    for h in 0..m {
        for k in h + 1..m {
            if group_sum(z, bandwidth, h, k) > bound {
                return false;
            }
        }
    }
    true
}

/// Projection of `v` onto `{x : Σ a_i |x_i| ≤ radius}` minimizing
/// `Σ w_i (x_i − v_i)²`. Coefficients `a` and weights `w` must be positive.
pub fn weighted_l1_ball_projection(v: &[f64], coef: &[f64], weight: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(v.len() == coef.len() && v.len() == weight.len());
    let used: f64 = v.iter().zip(coef).map(|(x, a)| a * x.abs()).sum();
    if used <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    // x_i = sign(v_i) max(|v_i| − τ a_i / w_i, 0); coordinate i is active
    // while τ < |v_i| w_i / a_i
    let mut order: Vec<usize> = (0..v.len()).collect();
    let breakpoint = |i: usize| v[i].abs() * weight[i] / coef[i];
    order.sort_by(|&i, &j| breakpoint(j).total_cmp(&breakpoint(i)));
    let mut num = -radius;
    let mut den = 0.0;
    let mut tau = 0.0;
    for &i in &order {
        let bp = breakpoint(i);
        let cand_num = num + coef[i] * v[i].abs();
        let cand_den = den + coef[i] * coef[i] / weight[i];
        let cand = cand_num / cand_den;
        if cand >= bp {
            break;
        }
        num = cand_num;
        den = cand_den;
        tau = cand;
    }
    v.iter()
        .zip(coef)
        .zip(weight)
        .map(|((x, a), w)| x.signum() * (x.abs() - tau * a / w).max(0.0))
        .collect()
}

/// Euclidean (`‖·‖_𝒞`) projection onto `𝒵`. Diagonals of lags `0..=n` are
/// zeroed, every pair group is projected onto its weighted ℓ1 ball, and lags
/// beyond `n` are returned unchanged.
pub fn project_z(z: &BlockCirculant, gb: &GroupBound, bandwidth: usize) -> BlockCirculant {
    let m = z.m();
    let period = z.period();
    let half = period / 2;
    let mut blocks: Vec<_> = z.blocks().to_vec();
    for b in blocks.iter_mut().take(bandwidth + 1) {
        b.fill_diagonal(0.0);
    }
    // Squared 𝒞-norm multiplicity of one coefficient: lag-0 pairs occupy two
    // entries of C_0, lag-j entries occur in C_j and transposed in C_{N−j};
    // every block appears N times in the full matrix.
    let lag_weight = |j: usize| {
        let copies = if j == 0 { 2.0 } else if j == half { 1.0 } else { 2.0 };
        copies * period as f64
    };
    let glen = 1 + 2 * bandwidth;
    let mut coef = vec![1.0; glen];
    coef[0] = 2.0;
    let mut weight = vec![lag_weight(0); glen];
    for j in 1..=bandwidth {
        weight[2 * j - 1] = lag_weight(j);
        weight[2 * j] = lag_weight(j);
    }
    let mut g = vec![0.0; glen];
    for h in 0..m {
        for k in h + 1..m {
            g[0] = blocks[0][(h, k)];
            for j in 1..=bandwidth {
                g[2 * j - 1] = blocks[j][(h, k)];
                g[2 * j] = blocks[j][(k, h)];
            }
            let p = weighted_l1_ball_projection(&g, &coef, &weight, gb.bound());
            blocks[0][(h, k)] = p[0];
            blocks[0][(k, h)] = p[0];
            for j in 1..=bandwidth {
                blocks[j][(h, k)] = p[2 * j - 1];
                blocks[j][(k, h)] = p[2 * j];
            }
        }
    }
    BlockCirculant::from_blocks_unchecked(period, blocks)
}

/// Checks `⟨Z, Y⟩ ≤ λ_S h∞(Y) + 1e−9`, the boundedness condition of the
/// `Y`-part of the Lagrangian for feasible `Z`.
pub fn dual_pairing_bound_check(z: &BlockCirculant, y: &BandedBlockCirculant, gb: &GroupBound) -> bool {
    let lhs = z.inner_unchecked(y);
    lhs <= gb.lambda_s() * h_inf(y) + 1e-9
}
