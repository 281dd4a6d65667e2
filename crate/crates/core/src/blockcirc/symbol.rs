use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::BlockCirculant;
use crate::error::{Error, Result};

/// Tolerance for the Hermitian check on user-supplied symbol values.
const HERMITIAN_TOL: f64 = 1e-12;
/// Largest imaginary (or transpose-mismatch) residue accepted when
/// transforming back to real blocks.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Frequency-domain representation of a symmetric block-circulant matrix:
/// the `N` Hermitian blocks `Φ(ζ⁰), …, Φ(ζ^{N−1})` with `ζ = exp(i2π/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    m: usize,
    values: Vec<DMatrix<Complex64>>,
}

pub(crate) fn hermitize(a: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Cholesky factor of a Hermitian matrix, or `None` unless it is positive
/// definite. The complex square root never fails, so positivity is read off
/// the factor: a pivot with nonpositive real part yields a diagonal entry
/// whose imaginary part dominates.
pub fn hermitian_cholesky(a: DMatrix<Complex64>) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = nalgebra::Cholesky::new(a)?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.im.abs() < d.re && d.re.is_finite());
    ok.then_some(chol)
}

/// `A⁻¹ = L⁻ᴴ L⁻¹` from the lower Cholesky factor of `A`.
pub fn cholesky_inverse(chol: &nalgebra::Cholesky<Complex64, nalgebra::Dyn>) -> DMatrix<Complex64> {
    let l = chol.l_dirty();
    let n = l.nrows();
    let zero = Complex64::new(0.0, 0.0);
    // row-major copy of the lower triangle, then W = L⁻¹ in place
    let mut w = vec![zero; n * n];
    let lt: Vec<Complex64> = (0..n * n).map(|i| l[(i / n, i % n)]).collect();
    for j in 0..n {
        w[j * n + j] = Complex64::new(1.0 / lt[j * n + j].re, 0.0);
        for i in j + 1..n {
            let mut acc = zero;
            for k in j..i {
                acc += lt[i * n + k] * w[k * n + j];
            }
            w[i * n + j] = -acc / lt[i * n + i].re;
        }
    }
    let mut out = DMatrix::from_element(n, n, zero);
    for a in 0..n {
        for b in a..n {
            let mut acc = zero;
            for k in b..n {
                acc += w[k * n + a].conj() * w[k * n + b];
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc.conj();
        }
    }
    out
}

impl Symbol {
    /// Wraps user-supplied values after checking that each is Hermitian.
    pub fn new(values: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let period = values.len();
        if period < 2 || period % 2 != 0 {
            return Err(Error::OddPeriod { period });
        }
        let m = values[0].nrows();
        for (k, v) in values.iter().enumerate() {
            if v.nrows() != m || v.ncols() != m {
                return Err(Error::Dimension(format!(
                    "symbol value {k} is {}x{}, expected {m}x{m}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            let scale = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let skew = (v - v.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if skew > HERMITIAN_TOL * scale {
                return Err(Error::Dimension(format!(
                    "symbol value {k} is not Hermitian (skew {skew:e})"
                )));
            }
        }
        let mut values = values;
        values.iter_mut().for_each(hermitize);
        Ok(Symbol { m, values })
    }

    pub(crate) fn from_raw(m: usize, values: Vec<DMatrix<Complex64>>) -> Self {
        Symbol { m, values }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[DMatrix<Complex64>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &DMatrix<Complex64> {
        &self.values[k]
    }

    pub fn into_values(self) -> Vec<DMatrix<Complex64>> {
        self.values
    }

    /// Applies `f` to the blocks `k = 0..=N/2` and fills the remaining ones by
    /// conjugate symmetry. Valid for maps that commute with entrywise
    /// conjugation (inversion, eigenvalue clipping, ...).
    pub(crate) fn map_conjugate_symmetric<F>(&self, mut f: F) -> Result<Symbol>
    where
        F: FnMut(usize, &DMatrix<Complex64>) -> Result<DMatrix<Complex64>>,
    {
        let period = self.period();
        let half = period / 2;
        let mut out: Vec<DMatrix<Complex64>> = Vec::with_capacity(period);
        for k in 0..=half {
            let mut v = f(k, &self.values[k])?;
            hermitize(&mut v);
            out.push(v);
        }
        for k in half + 1..period {
            let mirror = out[period - k].map(|z| z.conj());
            out.push(mirror);
        }
        Ok(Symbol {
            m: self.m,
            values: out,
        })
    }

    /// Inverse transform back to the first block column.
    pub fn to_block_circulant(&self) -> Result<BlockCirculant> {
        let period = self.period();
        let half = period / 2;
        let m = self.m;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * period];
        for (k, v) in self.values.iter().enumerate() {
            for a in 0..m {
                for b in 0..m {
                    buf[(a * m + b) * period + k] = v[(a, b)];
                }
            }
        }
        inverse_plan(period).process(&mut buf);
        let scale = 1.0 / period as f64;
        let entry = |a: usize, b: usize, j: usize| buf[(a * m + b) * period + j] * scale;

        let mut residue = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                for j in 0..period {
                    let z = entry(a, b, j);
                    residue = residue.max(z.im.abs());
                    if j > half {
                        residue = residue.max((z.re - entry(b, a, period - j).re).abs());
                    }
                }
            }
        }
        if residue > IMAGINARY_RESIDUE_TOL {
            return Err(Error::ImaginaryResidue { residue });
        }
        let blocks = (0..=half)
            .map(|j| DMatrix::from_fn(m, m, |a, b| entry(a, b, j).re))
            .collect();
        Ok(BlockCirculant::from_blocks_unchecked(period, blocks))
    }
}

/// Forward transform `Φ(ζ^k) = Σ_j C_j ζ^{−kj}` over the full first block column.
pub(crate) fn symbol_of(c: &BlockCirculant) -> Symbol {
    let period = c.period();
    let half = period / 2;
    let m = c.m();
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m * period];
    for a in 0..m {
        for b in 0..m {
            let row = &mut buf[(a * m + b) * period..(a * m + b + 1) * period];
            for (j, slot) in row.iter_mut().enumerate() {
                let v = if j <= half {
                    c.blocks()[j][(a, b)]
                } else {
                    c.blocks()[period - j][(b, a)]
                };
                *slot = Complex64::new(v, 0.0);
            }
        }
    }
    forward_plan(period).process(&mut buf);
    let values = (0..period)
        .map(|k| {
            let mut v = DMatrix::from_fn(m, m, |a, b| buf[(a * m + b) * period + k]);
            hermitize(&mut v);
            v
        })
        .collect();
    Symbol::from_raw(m, values)
}
