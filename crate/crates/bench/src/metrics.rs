//! Scores against a known ground truth.

use std::f64::consts::PI;

use recipgm::solver::spectrum;
use recipgm::{BandedBlockCirculant, Error, Result, SupportPattern};
use serde::{Deserialize, Serialize};

fn same_dim(a: &SupportPattern, b: &SupportPattern) -> Result<()> {
    if a.m() != b.m() {
        return Err(Error::Dimension(format!("support patterns of size {} and {}", a.m(), b.m())));
    }
    Ok(())
}

/// Misclassified off-diagonal entries of the full `m×m` pattern, so every
/// wrong pair counts twice.
pub fn support_error(estimate: &SupportPattern, truth: &SupportPattern) -> Result<usize> {
    same_dim(estimate, truth)?;
    let missed = truth.upper_pairs().filter(|&(i, j)| !estimate.contains(i, j)).count();
    let spurious = estimate.upper_pairs().filter(|&(i, j)| !truth.contains(i, j)).count();
    Ok(2 * (missed + spurious))
}

/// F1 score over off-diagonal pairs. Two diagonal-only patterns score 1.
pub fn support_f1(estimate: &SupportPattern, truth: &SupportPattern) -> Result<f64> {
    same_dim(estimate, truth)?;
    let (ne, nt) = (estimate.num_upper_pairs(), truth.num_upper_pairs());
    if ne + nt == 0 {
        return Ok(1.0);
    }
    let hits = estimate.upper_pairs().filter(|&(i, j)| truth.contains(i, j)).count();
    Ok(2.0 * hits as f64 / (ne + nt) as f64)
}

/// `k` midpoints of a uniform partition of `[−π, π]`.
pub fn theta_grid(k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / k as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralError {
    pub theta: Vec<f64>,
    /// `‖Φ(θ) − Φ̂(θ)‖²_F / ‖Φ(θ)‖²_F`
    pub curve: Vec<f64>,
    /// Uniform-quadrature mean of the curve.
    pub mean: f64,
}

/// Relative squared error between the spectra of two concentration models.
pub fn spectral_error(
    estimate: &BandedBlockCirculant,
    truth: &BandedBlockCirculant,
    theta: &[f64],
) -> Result<SpectralError> {
    if estimate.m() != truth.m() {
        return Err(Error::Dimension("estimate and truth differ in block size".into()));
    }
    let est = spectrum(estimate, theta)?;
    let tru = spectrum(truth, theta)?;
    let curve: Vec<f64> = est
        .iter()
        .zip(&tru)
        .map(|(e, t)| (t - e).norm_squared() / t.norm_squared())
        .collect();
    let mean = if curve.is_empty() {
        0.0
    } else {
        curve.iter().sum::<f64>() / curve.len() as f64
    };
    Ok(SpectralError {
        theta: theta.to_vec(),
        curve,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use recipgm::BlockCirculant;

    fn pattern(m: usize, pairs: &[(usize, usize)]) -> SupportPattern {
        SupportPattern::from_pairs(m, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn identical_supports() {
        let s = pattern(5, &[(0, 1), (2, 4)]);
        assert_eq!(support_error(&s, &s).unwrap(), 0);
        assert_eq!(support_f1(&s, &s).unwrap(), 1.0);
    }

    #[test]
    fn full_grid_cardinality_convention() {
        // 158 pairs out of m = 80
        let pairs: Vec<(usize, usize)> = (0..80)
            .flat_map(|i| (i + 1..80).map(move |j| (i, j)))
            .take(158)
            .collect();
        let s = pattern(80, &pairs);
        assert_eq!(s.cardinality(), 396);
    }

    #[test]
    fn diagonal_estimate_against_ten_pairs() {
        let pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, i + 1)).collect();
        let truth = pattern(20, &pairs);
        let diag = SupportPattern::diagonal(20);
        assert_eq!(support_error(&diag, &truth).unwrap(), 20);
        assert_eq!(support_f1(&diag, &truth).unwrap(), 0.0);
    }

    #[test]
    fn error_is_symmetric() {
        let a = pattern(6, &[(0, 1), (1, 2), (3, 5)]);
        let b = pattern(6, &[(0, 1), (2, 4)]);
        assert_eq!(support_error(&a, &b).unwrap(), support_error(&b, &a).unwrap());
        assert_eq!(support_error(&a, &b).unwrap(), 2 * 3);
        assert!((support_f1(&a, &b).unwrap() - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(support_error(&SupportPattern::diagonal(3), &SupportPattern::diagonal(4)).is_err());
        assert!(support_f1(&SupportPattern::diagonal(3), &SupportPattern::diagonal(4)).is_err());
    }

    #[test]
    fn spectral_error_examples() {
        let theta = theta_grid(64);
        let truth = BlockCirculant::identity(2, 8).project_banded(1).unwrap();
        let same = spectral_error(&truth, &truth, &theta).unwrap();
        assert!(same.curve.iter().all(|&v| v == 0.0) && same.mean == 0.0);

        let eps = 0.3;
        let scaled = BlockCirculant::scaled_identity(1, 8, 1.0 + eps).project_banded(1).unwrap();
        let unit = BlockCirculant::identity(1, 8).project_banded(1).unwrap();
        let e = spectral_error(&scaled, &unit, &theta).unwrap();
        let want = (1.0 - 1.0 / (1.0 + eps)).powi(2);
        assert!(e.curve.iter().all(|&v| (v - want).abs() < 1e-14));
        assert!((e.mean - want).abs() < 1e-14);
    }

    #[test]
    fn spectral_error_of_a_scalar_ar_model() {
        // X(θ) = 2 − 1.6 cos θ against 2 − 1.2 cos θ, checked pointwise
        let lags = |a: f64| {
            BandedBlockCirculant::from_lags(10, &[DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, -a)]).unwrap()
        };
        let theta = theta_grid(40);
        let e = spectral_error(&lags(0.8), &lags(0.6), &theta).unwrap();
        for (t, v) in theta.iter().zip(&e.curve) {
            let (phi, phi_hat) = (1.0 / (2.0 - 1.2 * t.cos()), 1.0 / (2.0 - 1.6 * t.cos()));
            assert!((v - ((phi - phi_hat) / phi).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_grid_is_symmetric_midpoints() {
        let t = theta_grid(8);
        assert_eq!(t.len(), 8);
        for i in 0..8 {
            assert!((t[i] + t[7 - i]).abs() < 1e-15);
        }
        assert!((t[1] - t[0] - PI / 4.0).abs() < 1e-15);
    }
}
