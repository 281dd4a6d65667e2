//! Dense oracles and random instances shared by the unit tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockcirc::BlockCirculant;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Materializes the full `mN×mN` matrix straight from the circulant
/// definition: block `(i, l)` is `C_{(i−l) mod N}`.
pub fn dense(c: &BlockCirculant) -> DMatrix<f64> {
    let (m, period) = (c.m(), c.period());
    let half = period / 2;
    let mut out = DMatrix::zeros(m * period, m * period);
    for i in 0..period {
        for l in 0..period {
            let d = (i + period - l) % period;
            for a in 0..m {
                for b in 0..m {
                    out[(i * m + a, l * m + b)] = if d <= half {
                        c.blocks()[d][(a, b)]
                    } else {
                        c.blocks()[period - d][(b, a)]
                    };
                }
            }
        }
    }
    out
}

pub fn random_matrix(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0))
}

/// Random symmetric block-circulant matrix with lags up to `bandwidth`
/// (`None` for a full first block column).
pub fn random_bc(rng: &mut impl Rng, m: usize, period: usize, bandwidth: Option<usize>) -> BlockCirculant {
    let half = period / 2;
    let used = bandwidth.unwrap_or(half);
    let blocks = (0..=half)
        .map(|j| {
            if j > used {
                DMatrix::zeros(m, m)
            } else {
                let a = random_matrix(rng, m);
                if j == 0 || j == half {
                    (&a + a.transpose()) * 0.5
                } else {
                    a
                }
            }
        })
        .collect();
    BlockCirculant::new(period, blocks).unwrap()
}

/// Random positive definite instance: diagonal dominance of the dense matrix
/// guarantees it without consulting any eigensolver.
pub fn random_pd(rng: &mut impl Rng, m: usize, period: usize, bandwidth: Option<usize>) -> BlockCirculant {
    let c = random_bc(rng, m, period, bandwidth);
    let d = dense(&c);
    let row_sum = (0..d.nrows())
        .map(|i| d.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    c.add_identity(row_sum + 0.5)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
