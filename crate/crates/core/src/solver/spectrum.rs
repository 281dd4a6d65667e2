use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::blockcirc::{cholesky_inverse, hermitian_cholesky, BandedBlockCirculant};
use crate::error::{Error, Result};

/// `Φ̂(e^{iθ}) = (Σ_{k=−n}^{n} X_k e^{−iθk})⁻¹` on a grid of frequencies, with
/// `X_{−k} = X_kᵀ`.
pub fn spectrum(x: &BandedBlockCirculant, thetas: &[f64]) -> Result<Vec<DMatrix<Complex64>>> {
    let lags = x.lags();
    thetas
        .iter()
        .map(|&theta| {
            let mut s: DMatrix<Complex64> = lags[0].map(|v| Complex64::new(v, 0.0));
            for (k, xk) in lags.iter().enumerate().skip(1) {
                let w = Complex64::from_polar(1.0, -theta * k as f64);
                s += xk.map(|v| w * v) + xk.transpose().map(|v| w.conj() * v);
            }
            // exact Hermitian symmetry before factorizing
            let s = (&s + s.adjoint()).scale(0.5);
            hermitian_cholesky(s)
                .map(|c| cholesky_inverse(&c))
                .ok_or(Error::SingularAtFrequency { theta })
        })
        .collect()
}
