//! Symmetric block-circulant matrices.
//!
//! A matrix `circ{C_0, C_1, …, C_{N/2}, C_{N/2−1}ᵀ, …, C_1ᵀ}` is stored as its
//! first block column up to `C_{N/2}`. Every operation that is not linear in
//! the blocks goes through the symbol (the blockwise DFT), where the matrix is
//! block diagonal: inversion, eigendecomposition and PSD projection reduce to
//! `N` independent `m×m` Hermitian problems.

mod support;
mod symbol;

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub use support::SupportPattern;
pub use symbol::{cholesky_inverse, hermitian_cholesky, Symbol, IMAGINARY_RESIDUE_TOL};

use crate::error::{Error, Result};

/// Relative threshold below which a symbol eigenvalue counts as zero for
/// inversion.
const SINGULAR_RTOL: f64 = 1e-12;

/// Blockwise Cholesky factorization of a positive definite block-circulant
/// matrix.
#[derive(Debug, Clone)]
pub struct PdFactor {
    period: usize,
    factors: Vec<nalgebra::Cholesky<Complex64, nalgebra::Dyn>>,
    logdet: f64,
}

impl PdFactor {
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn inverse(&self) -> Result<BlockCirculant> {
        let half = self.period / 2;
        let mut values: Vec<DMatrix<Complex64>> = self.factors.iter().map(cholesky_inverse).collect();
        for k in half + 1..self.period {
            let mirror = values[self.period - k].map(|z| z.conj());
            values.push(mirror);
        }
        let m = values[0].nrows();
        BlockCirculant::from_symbol(&Symbol::from_raw(m, values))
    }
}

/// Real symmetric block-circulant matrix of block size `m` and period `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCirculant {
    period: usize,
    blocks: Vec<DMatrix<f64>>,
}

/// Eigendecomposition of every symbol block.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    /// `values[k]` are the (ascending) eigenvalues of `Φ(ζ^k)`.
    pub values: Vec<Vec<f64>>,
    /// Unitary eigenvector matrices, columns matching `values[k]`.
    pub vectors: Vec<DMatrix<Complex64>>,
}

impl BlockEigen {
    /// All `mN` eigenvalues of the full matrix.
    pub fn spectrum(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_period(period: usize) -> Result<()> {
    if period < 2 || period % 2 != 0 {
        Err(Error::OddPeriod { period })
    } else {
        Ok(())
    }
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

impl BlockCirculant {
    /// Builds a matrix from `C_0, …, C_{N/2}`. `C_0` and `C_{N/2}` must be
    /// symmetric (to 1e-10 relative); they are symmetrized exactly.
    pub fn new(period: usize, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        check_period(period)?;
        if blocks.len() != period / 2 + 1 {
            return Err(Error::Dimension(format!(
                "expected {} blocks for N = {period}, got {}",
                period / 2 + 1,
                blocks.len()
            )));
        }
        let m = blocks[0].nrows();
        if m == 0 {
            return Err(Error::Dimension("block dimension must be positive".into()));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::Dimension(format!(
                    "block {j} is {}x{}, expected {m}x{m}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let mut blocks = blocks;
        for j in [0, period / 2] {
            let b = &blocks[j];
            let scale = b.amax().max(1.0);
            if (b - b.transpose()).amax() > 1e-10 * scale {
                return Err(Error::Dimension(format!("block {j} must be symmetric")));
            }
            blocks[j] = symmetrize(b);
        }
        Ok(BlockCirculant { period, blocks })
    }

    pub(crate) fn from_blocks_unchecked(period: usize, mut blocks: Vec<DMatrix<f64>>) -> Self {
        let half = period / 2;
        blocks[0] = symmetrize(&blocks[0]);
        blocks[half] = symmetrize(&blocks[half]);
        BlockCirculant { period, blocks }
    }

    /// Banded matrix with lags `C_0, …, C_n` and zeros beyond.
    pub fn from_lags(period: usize, lags: &[DMatrix<f64>]) -> Result<Self> {
        check_period(period)?;
        let Some(first) = lags.first() else {
            return Err(Error::Dimension("at least one lag required".into()));
        };
        let n = lags.len() - 1;
        if period <= 2 * n {
            return Err(Error::BandTooWide {
                bandwidth: n,
                period,
            });
        }
        let m = first.nrows();
        let mut blocks = vec![DMatrix::zeros(m, m); period / 2 + 1];
        for (j, l) in lags.iter().enumerate() {
            blocks[j] = l.clone();
        }
        Self::new(period, blocks)
    }

    pub fn zeros(m: usize, period: usize) -> Self {
        BlockCirculant {
            period,
            blocks: vec![DMatrix::zeros(m, m); period / 2 + 1],
        }
    }

    pub fn identity(m: usize, period: usize) -> Self {
        Self::scaled_identity(m, period, 1.0)
    }

    pub fn scaled_identity(m: usize, period: usize, scale: f64) -> Self {
        let mut c = Self::zeros(m, period);
        c.blocks[0] = DMatrix::identity(m, m) * scale;
        c
    }

    pub fn m(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Stored blocks `C_0, …, C_{N/2}`.
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &DMatrix<f64> {
        &self.blocks[j]
    }

    /// `C_j` for any `j` in `0..N` (using `C_j = C_{N−j}ᵀ` past the middle).
    pub fn lag(&self, j: usize) -> DMatrix<f64> {
        let j = j % self.period;
        if j <= self.period / 2 {
            self.blocks[j].clone()
        } else {
            self.blocks[self.period - j].transpose()
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.period != other.period || self.m() != other.m() {
            return Err(Error::Dimension(format!(
                "shape mismatch: (m={}, N={}) vs (m={}, N={})",
                self.m(),
                self.period,
                other.m(),
                other.period
            )));
        }
        Ok(())
    }

    pub fn symbol(&self) -> Symbol {
        symbol::symbol_of(self)
    }

    pub fn from_symbol(s: &Symbol) -> Result<Self> {
        s.to_block_circulant()
    }

    pub fn eig(&self) -> BlockEigen {
        let sym = self.symbol();
        let half = self.period / 2;
        let mut values = Vec::with_capacity(self.period);
        let mut vectors = Vec::with_capacity(self.period);
        let mut computed: Vec<(Vec<f64>, DMatrix<Complex64>)> = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let e = SymmetricEigen::new(sym.value(k).clone());
            let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
            idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
            let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
            let vecs = DMatrix::from_fn(self.m(), self.m(), |r, c| e.eigenvectors[(r, idx[c])]);
            computed.push((vals, vecs));
        }
        for k in 0..self.period {
            if k <= half {
                values.push(computed[k].0.clone());
                vectors.push(computed[k].1.clone());
            } else {
                let (v, w) = &computed[self.period - k];
                values.push(v.clone());
                vectors.push(w.map(|z| z.conj()));
            }
        }
        BlockEigen { values, vectors }
    }

    /// Blockwise inverse through the symbol.
    pub fn inverse(&self) -> Result<Self> {
        let sym = self.symbol();
        let half = self.period / 2;
        let eigs: Vec<SymmetricEigen<Complex64, nalgebra::Dyn>> = (0..=half)
            .map(|k| SymmetricEigen::new(sym.value(k).clone()))
            .collect();
        let largest = eigs
            .iter()
            .flat_map(|e| e.eigenvalues.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        let inv = sym.map_conjugate_symmetric(|k, _| {
            let e = &eigs[k];
            let smallest = e.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
            if !(smallest > SINGULAR_RTOL * largest) {
                return Err(Error::SingularSymbol { index: k });
            }
            let d = e.eigenvalues.map(|v| Complex64::new(1.0 / v, 0.0));
            Ok(&e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.adjoint())
        })?;
        Self::from_symbol(&inv)
    }

    /// Cholesky factors of the symbol blocks `k = 0..=N/2`; fails unless
    /// the matrix is positive definite.
    pub fn pd_factor(&self) -> Result<PdFactor> {
        let sym = self.symbol();
        let half = self.period / 2;
        let mut logdet = 0.0;
        let mut factors = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let chol = hermitian_cholesky(sym.value(k).clone()).ok_or(Error::NotPositiveDefinite { index: k })?;
            let ld: f64 = chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>() * 2.0;
            logdet += if k == 0 || k == half { ld } else { 2.0 * ld };
            factors.push(chol);
        }
        Ok(PdFactor {
            period: self.period,
            factors,
            logdet,
        })
    }

    /// Inverse and log-determinant of a positive definite matrix.
    pub fn pd_inverse_logdet(&self) -> Result<(Self, f64)> {
        let f = self.pd_factor()?;
        Ok((f.inverse()?, f.logdet()))
    }

    /// `log det` of a positive definite matrix, `Σ_k log det Φ(ζ^k)`.
    pub fn logdet(&self) -> Result<f64> {
        self.pd_factor().map(|f| f.logdet())
    }

    /// Nearest positive semidefinite matrix in Frobenius norm: eigenvalues of
    /// every symbol block clipped at zero.
    pub fn psd_project(&self) -> Self {
        let sym = self.symbol();
        let clipped = sym
            .map_conjugate_symmetric(|_, v| {
                if hermitian_cholesky(v.clone()).is_some() {
                    return Ok(v.clone());
                }
                let e = SymmetricEigen::new(v.clone());
                if e.eigenvalues.iter().all(|&l| l >= 0.0) {
                    return Ok(v.clone());
                }
                // rank-k update over whichever side of the spectrum is smaller
                let negatives = e.eigenvalues.iter().filter(|&&l| l < 0.0).count();
                let keep_negative = 2 * negatives <= e.eigenvalues.len();
                let (mut out, sign) = if keep_negative {
                    (v.clone(), -1.0)
                } else {
                    (DMatrix::zeros(v.nrows(), v.ncols()), 1.0)
                };
                for i in 0..e.eigenvalues.len() {
                    let l = e.eigenvalues[i];
                    if (l < 0.0) != keep_negative {
                        continue;
                    }
                    let u = e.eigenvectors.column(i);
                    out.gerc(Complex64::new(sign * l, 0.0), &u, &u, Complex64::new(1.0, 0.0));
                }
                Ok(out)
            })
            .expect("clipping cannot fail");
        Self::from_symbol(&clipped).expect("clipped symbol stays conjugate symmetric")
    }

    /// `P_ℬ`: keeps lags `0..=n`, zeroes the rest.
    pub fn project_banded(&self, bandwidth: usize) -> Result<BandedBlockCirculant> {
        if self.period <= 2 * bandwidth {
            return Err(Error::BandTooWide {
                bandwidth,
                period: self.period,
            });
        }
        let mut out = self.clone();
        let m = self.m();
        for b in out.blocks.iter_mut().skip(bandwidth + 1) {
            *b = DMatrix::zeros(m, m);
        }
        Ok(BandedBlockCirculant {
            inner: out,
            bandwidth,
        })
    }

    /// `P_{ℬᶜ} = I − P_ℬ`: keeps only lags beyond `n`.
    pub fn out_of_band(&self, bandwidth: usize) -> Self {
        let mut out = self.clone();
        let m = self.m();
        for b in out.blocks.iter_mut().take(bandwidth + 1) {
            *b = DMatrix::zeros(m, m);
        }
        out
    }

    /// `P_Ω`: zeroes entries outside the support in every block.
    pub fn project_support(&self, support: &SupportPattern) -> Result<Self> {
        if support.m() != self.m() {
            return Err(Error::Dimension(format!(
                "support is for m = {}, matrix has m = {}",
                support.m(),
                self.m()
            )));
        }
        let mask = support.mask();
        Ok(BlockCirculant {
            period: self.period,
            blocks: self.blocks.iter().map(|b| b.component_mul(&mask)).collect(),
        })
    }

    /// `⟨C, D⟩ = tr(Cᵀ D)` over the full `mN×mN` matrices.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Self) -> f64 {
        let half = self.period / 2;
        let mut acc = 0.0;
        for (j, (a, b)) in self.blocks.iter().zip(&other.blocks).enumerate() {
            let d = a.dot(b);
            acc += if j == 0 || j == half { d } else { 2.0 * d };
        }
        self.period as f64 * acc
    }

    /// Frobenius norm of the full matrix.
    pub fn norm(&self) -> f64 {
        self.inner_unchecked(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.period as f64 * self.blocks[0].trace()
    }

    /// Adds `shift·I`.
    pub fn add_identity(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.m() {
            out.blocks[0][(i, i)] += shift;
        }
        out
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        debug_assert_eq!(self.period, other.period);
        BlockCirculant {
            period: self.period,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b * alpha)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        BlockCirculant {
            period: self.period,
            blocks: self.blocks.iter().map(|a| a * alpha).collect(),
        }
    }

    /// Largest absolute entry over all blocks.
    pub fn amax(&self) -> f64 {
        self.blocks.iter().map(|b| b.amax()).fold(0.0, f64::max)
    }

    /// Whether every stored block beyond lag `n` is exactly zero.
    pub fn is_banded(&self, bandwidth: usize) -> bool {
        self.blocks
            .iter()
            .skip(bandwidth + 1)
            .all(|b| b.iter().all(|&v| v == 0.0))
    }
}

impl Add<&BlockCirculant> for &BlockCirculant {
    type Output = BlockCirculant;
    fn add(self, rhs: &BlockCirculant) -> BlockCirculant {
        self.axpy(1.0, rhs)
    }
}

impl Sub<&BlockCirculant> for &BlockCirculant {
    type Output = BlockCirculant;
    fn sub(self, rhs: &BlockCirculant) -> BlockCirculant {
        self.axpy(-1.0, rhs)
    }
}

impl AddAssign<&BlockCirculant> for BlockCirculant {
    fn add_assign(&mut self, rhs: &BlockCirculant) {
        for (a, b) in self.blocks.iter_mut().zip(&rhs.blocks) {
            *a += b;
        }
    }
}

impl SubAssign<&BlockCirculant> for BlockCirculant {
    fn sub_assign(&mut self, rhs: &BlockCirculant) {
        for (a, b) in self.blocks.iter_mut().zip(&rhs.blocks) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &BlockCirculant {
    type Output = BlockCirculant;
    fn mul(self, rhs: f64) -> BlockCirculant {
        self.scale(rhs)
    }
}

impl Neg for &BlockCirculant {
    type Output = BlockCirculant;
    fn neg(self) -> BlockCirculant {
        self.scale(-1.0)
    }
}

/// Block-circulant matrix whose lags beyond the bandwidth `n` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedBlockCirculant {
    inner: BlockCirculant,
    bandwidth: usize,
}

impl BandedBlockCirculant {
    /// Wraps `c` after checking that it is banded of bandwidth `n`.
    pub fn new(c: BlockCirculant, bandwidth: usize) -> Result<Self> {
        if c.period() <= 2 * bandwidth {
            return Err(Error::BandTooWide {
                bandwidth,
                period: c.period(),
            });
        }
        if !c.is_banded(bandwidth) {
            return Err(Error::Dimension(format!(
                "matrix has nonzero lags beyond bandwidth {bandwidth}"
            )));
        }
        Ok(BandedBlockCirculant {
            inner: c,
            bandwidth,
        })
    }

    pub fn from_lags(period: usize, lags: &[DMatrix<f64>]) -> Result<Self> {
        let c = BlockCirculant::from_lags(period, lags)?;
        Ok(BandedBlockCirculant {
            inner: c,
            bandwidth: lags.len() - 1,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Lags `C_0, …, C_n`.
    pub fn lags(&self) -> &[DMatrix<f64>] {
        &self.inner.blocks()[..=self.bandwidth]
    }

    pub fn as_block_circulant(&self) -> &BlockCirculant {
        &self.inner
    }

    pub fn into_inner(self) -> BlockCirculant {
        self.inner
    }
}

impl std::ops::Deref for BandedBlockCirculant {
    type Target = BlockCirculant;
    fn deref(&self) -> &BlockCirculant {
        &self.inner
    }
}
