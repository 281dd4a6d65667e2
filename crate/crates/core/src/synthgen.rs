//! Synthetic latent-variable reciprocal models and exact Gaussian sampling.
//!
//! The concentration is `Σ_y⁻¹ = S − L`, where `S` is banded with a random
//! group-sparse off-diagonal support and `L = 𝐆𝐆ᵀ` comes from a causal
//! banded `𝐆` with `l` columns per block, so every symbol block of `L` has
//! rank `l`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant, SupportPattern};
use crate::covest::TimeSeries;
use crate::error::{Error, Result};

/// How a density translates into a number of off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityBasis {
    /// `round(density · m(m−1)/2)` pairs.
    #[default]
    OffDiagonalPairs,
    /// `round(density · m² / 2)` pairs, i.e. the fraction counts nonzero
    /// off-diagonal entries of the full `m×m` grid.
    AllEntries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Lower bound on the symbol eigenvalues of `S − L`.
    pub margin: f64,
    /// Standard deviation of the entries of `𝐆`.
    pub latent_scale: f64,
    /// Off-diagonal coefficients of `S` are uniform on `[−c, c]`.
    pub coefficient_range: f64,
    /// Diagonal coefficients of `S` at lags `1..=n` are uniform on
    /// `[−d, d]`; at lag 0 they are `|U(−c, c)|`.
    pub diagonal_lag_range: f64,
    /// When set, the diagonal shift brings the condition number of `S − L`
    /// down to this value and both factors are then scaled so that the
    /// smallest symbol eigenvalue equals `margin`. Otherwise the shift alone
    /// lifts the smallest eigenvalue to `margin`.
    pub condition: Option<f64>,
    pub density_basis: DensityBasis,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            margin: 0.05,
            latent_scale: 1.0,
            coefficient_range: 1.0,
            diagonal_lag_range: 1.0,
            condition: None,
            density_basis: DensityBasis::default(),
        }
    }
}

impl GeneratorConfig {
    /// Settings of the 20-variable benchmark: `S − L` conditioned to 10 with
    /// smallest eigenvalue 1/15, white diagonal blocks beyond lag 0 and a
    /// latent factor of scale 0.17.
    pub fn benchmark() -> Self {
        GeneratorConfig {
            margin: 1.0 / 15.0,
            latent_scale: 0.17,
            diagonal_lag_range: 0.0,
            condition: Some(10.0),
            ..Default::default()
        }
    }
}

/// Ground truth `(S, L)` and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthModel {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub period: usize,
    pub s: BandedBlockCirculant,
    pub l_mat: BandedBlockCirculant,
    /// `(S − L)⁻¹`
    pub sigma_y: BlockCirculant,
    pub support: SupportPattern,
    pub density: f64,
    /// Shift added to the diagonal of `S_0` before scaling.
    pub shift: f64,
    /// Common factor applied to `S` and `L` after the shift.
    pub scale: f64,
    pub seed: u64,
    pub config: GeneratorConfig,
}

impl GroundTruthModel {
    /// `S − L`
    pub fn concentration(&self) -> BandedBlockCirculant {
        BandedBlockCirculant::new(&*self.s - &*self.l_mat, self.n).expect("difference of banded matrices")
    }

    /// True lag `k` of the process, the block `(Σ_y)_k`.
    pub fn lag(&self, k: usize) -> DMatrix<f64> {
        self.sigma_y.lag(k)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelDoc::from(self)).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Data(format!("model JSON: {e}")))?;
        doc.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Blocks as row-major nested arrays.
pub type MatrixDoc = Vec<Vec<f64>>;

pub fn matrix_to_doc(a: &DMatrix<f64>) -> MatrixDoc {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_doc(rows: &MatrixDoc) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Data("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    m: usize,
    l: usize,
    n: usize,
    period: usize,
    density: f64,
    seed: u64,
    shift: f64,
    #[serde(default = "unit")]
    scale: f64,
    config: GeneratorConfig,
    support: SupportPattern,
    s_lags: Vec<MatrixDoc>,
    l_lags: Vec<MatrixDoc>,
}

impl From<&GroundTruthModel> for ModelDoc {
    fn from(g: &GroundTruthModel) -> Self {
        ModelDoc {
            m: g.m,
            l: g.l,
            n: g.n,
            period: g.period,
            density: g.density,
            seed: g.seed,
            shift: g.shift,
            scale: g.scale,
            config: g.config.clone(),
            support: g.support.clone(),
            s_lags: g.s.lags().iter().map(matrix_to_doc).collect(),
            l_lags: g.l_mat.lags().iter().map(matrix_to_doc).collect(),
        }
    }
}

impl TryFrom<ModelDoc> for GroundTruthModel {
    type Error = Error;

    fn try_from(d: ModelDoc) -> Result<Self> {
        let parse = |lags: &[MatrixDoc]| -> Result<Vec<DMatrix<f64>>> { lags.iter().map(matrix_from_doc).collect() };
        let s = BandedBlockCirculant::from_lags(d.period, &parse(&d.s_lags)?)?;
        let l_mat = BandedBlockCirculant::from_lags(d.period, &parse(&d.l_lags)?)?;
        if s.m() != d.m || l_mat.m() != d.m || s.bandwidth() != d.n || d.support.m() != d.m {
            return Err(Error::Data("model document dimensions disagree".into()));
        }
        let sigma_y = (&*s - &*l_mat).inverse()?;
        Ok(GroundTruthModel {
            m: d.m,
            l: d.l,
            n: d.n,
            period: d.period,
            s,
            l_mat,
            sigma_y,
            support: d.support,
            density: d.density,
            shift: d.shift,
            scale: d.scale,
            seed: d.seed,
            config: d.config,
        })
    }
}

fn unit() -> f64 {
    1.0
}

/// Number of off-diagonal pairs a density asks for.
pub fn pair_count(m: usize, density: f64, basis: DensityBasis) -> usize {
    let raw = match basis {
        DensityBasis::OffDiagonalPairs => density * (m * (m - 1)) as f64 / 2.0,
        DensityBasis::AllEntries => density * (m * m) as f64 / 2.0,
    };
    (raw.round() as usize).min(m * (m - 1) / 2)
}

pub fn generate_model(m: usize, l: usize, n: usize, period: usize, density: f64, seed: u64) -> Result<GroundTruthModel> {
    generate_model_with(m, l, n, period, density, seed, &GeneratorConfig::default())
}

pub fn generate_model_with(
    m: usize,
    l: usize,
    n: usize,
    period: usize,
    density: f64,
    seed: u64,
    config: &GeneratorConfig,
) -> Result<GroundTruthModel> {
    if period % 2 != 0 {
        return Err(Error::OddPeriod { period });
    }
    if period <= 2 * n {
        return Err(Error::BandTooWide { bandwidth: n, period });
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Config(format!("density must lie in (0, 1), got {density}")));
    }
    if m < 2 || l >= m {
        return Err(Error::Config(format!("need m ≥ 2 and l < m, got m = {m}, l = {l}")));
    }
    if !(config.margin > 0.0)
        || !(config.latent_scale >= 0.0)
        || !(config.coefficient_range > 0.0)
        || !(config.diagonal_lag_range >= 0.0)
    {
        return Err(Error::Config("generator scales must be positive".into()));
    }
    if config.condition.is_some_and(|k| !(k > 1.0)) {
        return Err(Error::Config("target condition number must exceed 1".into()));
    }
    let pairs = pair_count(m, density, config.density_basis);
    if pairs == 0 {
        return Err(Error::DegenerateDensity);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let chosen = sample_indices(&mut rng, all.len(), pairs).into_vec();
    let support = SupportPattern::from_pairs(m, chosen.iter().map(|&i| all[i]))?;

    let c = config.coefficient_range;
    let coef = Uniform::new_inclusive(-c, c).expect("valid range");
    let d = config.diagonal_lag_range;
    let mut s_lags = vec![DMatrix::zeros(m, m); n + 1];
    for i in 0..m {
        for (j, lag) in s_lags.iter_mut().enumerate() {
            let u = coef.sample(&mut rng);
            lag[(i, i)] = if j == 0 { u.abs() } else { u * d / c };
        }
    }
    for (h, k) in support.upper_pairs() {
        let v = coef.sample(&mut rng);
        s_lags[0][(h, k)] = v;
        s_lags[0][(k, h)] = v;
        for lag in s_lags.iter_mut().skip(1) {
            lag[(h, k)] = coef.sample(&mut rng);
            lag[(k, h)] = coef.sample(&mut rng);
        }
    }

    // L_d = Σ_j G_{j+d} G_jᵀ for causal G_0..G_n
    let g: Vec<DMatrix<f64>> = (0..=n)
        .map(|_| DMatrix::from_fn(m, l, |_, _| config.latent_scale * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let l_lags: Vec<DMatrix<f64>> = (0..=n)
        .map(|d| {
            (0..=n - d).fold(DMatrix::zeros(m, m), |acc, j| acc + &g[j + d] * g[j].transpose())
        })
        .collect();
    let l_mat = BandedBlockCirculant::from_lags(period, &l_lags)?;

    let raw = BandedBlockCirculant::from_lags(period, &s_lags)?;
    let spec = (&*raw - &*l_mat).eig();
    let (min, max) = (spec.min(), spec.max());
    let (shift, scale) = match config.condition {
        None => ((config.margin - min).max(0.0), 1.0),
        Some(kappa) => {
            let shift = ((max - kappa * min) / (kappa - 1.0)).max(0.0);
            (shift, config.margin / (min + shift))
        }
    };
    for i in 0..m {
        s_lags[0][(i, i)] += shift;
    }
    s_lags.iter_mut().for_each(|b| *b *= scale);
    let s = BandedBlockCirculant::from_lags(period, &s_lags)?;
    let l_mat = BandedBlockCirculant::from_lags(period, &l_mat.lags().iter().map(|b| b * scale).collect::<Vec<_>>())?;
    let sigma_y = (&*s - &*l_mat).inverse()?;

    Ok(GroundTruthModel {
        m,
        l,
        n,
        period,
        s,
        l_mat,
        sigma_y,
        support,
        density,
        shift,
        scale,
        seed,
        config: config.clone(),
    })
}

/// `T` consecutive samples of the reciprocal process with the model's
/// concentration lags on a circle of even length `P ≥ T`, so the series has
/// no seams. As `P` grows this approaches the stationary process with
/// spectral density `(S − L)(e^{iθ})⁻¹`.
pub fn sample_single_period(model: &GroundTruthModel, t: usize, seed: u64) -> Result<TimeSeries> {
    let period = (t + t % 2).max(2 * model.n + 2);
    let x = BandedBlockCirculant::from_lags(period, model.concentration().lags())?;
    sample_covariance(&x.inverse()?, t, seed)
}

/// Exact zero-mean Gaussian draws with covariance `Σ_y`, one period at a
/// time, concatenated (and truncated) to `T` rows. Consecutive periods are
/// independent.
pub fn sample(model: &GroundTruthModel, t: usize, seed: u64) -> Result<TimeSeries> {
    sample_covariance(&model.sigma_y, t, seed)
}

/// Sampling from an arbitrary positive definite block-circulant covariance.
///
/// Per frequency the symbol is factored as `Φ(ζ^k) = W_k W_k*`; the DFT
/// coefficients `Y_k = √N W_k ξ_k` are drawn with `ξ_k` real standard normal
/// at `k ∈ {0, N/2}` and circular complex normal elsewhere, `Y_{N−k} = Ȳ_k`,
/// and the period is the inverse DFT of `Y`.
pub fn sample_covariance(sigma: &BlockCirculant, t: usize, seed: u64) -> Result<TimeSeries> {
    let (m, period) = (sigma.m(), sigma.period());
    let half = period / 2;
    let sym = sigma.symbol();
    let factors: Vec<DMatrix<Complex64>> = (0..=half)
        .map(|k| {
            crate::blockcirc::hermitian_cholesky(sym.value(k).clone())
                .map(|c| c.unpack())
                .ok_or(Error::NotPositiveDefinite { index: k })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(period);
    let root_n = (period as f64).sqrt();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let periods = t.div_ceil(period);
    let mut data = DMatrix::zeros(periods * period, m);
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); period]; m];

    for p in 0..periods {
        for (k, w) in factors.iter().enumerate() {
            let xi: DVector<Complex64> = if k == 0 || k == half {
                DVector::from_fn(m, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0))
            } else {
                DVector::from_fn(m, |_, _| {
                    Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                        * inv_sqrt2
                })
            };
            let mut y = (w * xi).map(|v| v * root_n);
            if k == 0 || k == half {
                // the symbol is real there, so is its factor; drop round-off
                y.iter_mut().for_each(|v| v.im = 0.0);
            }
            for i in 0..m {
                coeffs[i][k] = y[i];
                if k != 0 && k != half {
                    coeffs[i][period - k] = y[i].conj();
                }
            }
        }
        for (i, col) in coeffs.iter_mut().enumerate() {
            ifft.process(col);
            for (s, v) in col.iter().enumerate() {
                debug_assert!(v.im.abs() <= 1e-8 * v.re.abs().max(1.0));
                data[(p * period + s, i)] = v.re / period as f64;
            }
        }
    }
    TimeSeries::new(data.rows(0, t).into_owned())
}
