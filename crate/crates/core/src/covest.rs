//! Sample covariance lags and the banded data matrix `Σ̂`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::blockcirc::{BandedBlockCirculant, BlockCirculant};
use crate::error::{Error, Result};

/// `T` observations of an `m`-variate process, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::Data("time series needs at least one variable".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::Data(format!("non-finite value at row {r}, column {c}")));
        }
        Ok(TimeSeries { data })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start > end || end > self.len() {
            return Err(Error::Data(format!(
                "slice {start}..{end} out of range for {} samples",
                self.len()
            )));
        }
        Ok(TimeSeries {
            data: self.data.rows(start, end - start).into_owned(),
        })
    }

    /// Reads comma-separated rows of `m` numbers. A first row that does not
    /// parse as numbers is taken as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (line, rec) in rdr.records().enumerate() {
            let row = line + 1;
            let rec = rec.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, usize> = rec
                .iter()
                .enumerate()
                .map(|(c, f)| f.parse::<f64>().map_err(|_| c + 1))
                .collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(col) => {
                    return Err(Error::Data(format!(
                        "row {row}, column {col}: cannot parse {:?} as a number",
                        rec.get(col - 1).unwrap_or("")
                    )))
                }
            };
            match width {
                None => width = Some(values.len()),
                Some(w) if w != values.len() => {
                    return Err(Error::Data(format!(
                        "row {row}: expected {w} columns, found {}",
                        values.len()
                    )))
                }
                _ => {}
            }
            rows.push(values);
        }
        let m = width.ok_or_else(|| Error::Data("no data rows".into()))?;
        let data = DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c]);
        TimeSeries::new(data)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.dim()).map(|i| format!("y{}", i + 1)).collect();
        let io = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(&header).map_err(io)?;
        for r in 0..self.len() {
            w.write_record(self.data.row(r).iter().map(|v| format!("{v:e}")))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

/// Estimated lags `R̂_0, …, R̂_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagEstimates {
    pub lags: Vec<DMatrix<f64>>,
}

impl LagEstimates {
    pub fn order(&self) -> usize {
        self.lags.len() - 1
    }
}

/// Biased lag estimates `R̂_k = (1/T) Σ_{t=k+1}^{T} y(t) y(t−k)ᵀ` after
/// removing the sample mean.
pub fn estimate_lags(y: &TimeSeries, order: usize) -> Result<LagEstimates> {
    estimate_lags_with(y, order, true)
}

/// As [`estimate_lags`], optionally without centering.
pub fn estimate_lags_with(y: &TimeSeries, order: usize, center: bool) -> Result<LagEstimates> {
    let t = y.len();
    if t <= order {
        return Err(Error::InsufficientSamples {
            samples: t,
            lag: order,
        });
    }
    let mut data = y.data().clone();
    if center {
        for mut col in data.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    let scale = 1.0 / t as f64;
    let lags = (0..=order)
        .map(|k| {
            let ahead = data.rows(k, t - k);
            let behind = data.rows(0, t - k);
            let r = ahead.transpose() * behind * scale;
            if k == 0 {
                (&r + r.transpose()) * 0.5
            } else {
                r
            }
        })
        .collect();
    Ok(LagEstimates { lags })
}

/// `Σ̂ = circ{R̂_0, …, R̂_n, 0, …, 0, R̂_nᵀ, …, R̂_1ᵀ}` with its definiteness.
#[derive(Debug, Clone)]
pub struct SigmaHat {
    pub sigma: BandedBlockCirculant,
    /// Smallest eigenvalue over all symbol blocks.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl SigmaHat {
    fn from_matrix(sigma: BandedBlockCirculant) -> Self {
        let e = sigma.eig();
        SigmaHat {
            min_eigenvalue: e.min(),
            max_eigenvalue: e.max(),
            sigma,
        }
    }

    /// Positive definite up to a relative round-off threshold.
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > 1e-12 * self.max_eigenvalue.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn build_sigma_hat(lags: &LagEstimates, period: usize) -> Result<SigmaHat> {
    let sigma = BandedBlockCirculant::from_lags(period, &lags.lags)?;
    Ok(SigmaHat::from_matrix(sigma))
}

/// Default loading margin for [`diagonal_load`].
pub const DEFAULT_LOADING: f64 = 1e-6;

/// Shifts `R̂_0` by the smallest multiple of the identity that brings every
/// symbol eigenvalue to at least `epsilon`. Leaves matrices that already have
/// that margin untouched.
pub fn diagonal_load(sigma: &BandedBlockCirculant, epsilon: f64) -> Result<SigmaHat> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("loading margin must be positive, got {epsilon}")));
    }
    let min = sigma.eig().min();
    let shift = (epsilon - min).max(0.0);
    let loaded: BlockCirculant = sigma.add_identity(shift);
    let banded = BandedBlockCirculant::new(loaded, sigma.bandwidth())?;
    Ok(SigmaHat::from_matrix(banded))
}
