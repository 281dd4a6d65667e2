use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric set of index pairs on `{0..m}²` that always contains the
/// diagonal. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SupportRepr", into = "SupportRepr")]
pub struct SupportPattern {
    m: usize,
    // strictly upper pairs (i < j); the diagonal and lower mirror are implied
    upper: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct SupportRepr {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl TryFrom<SupportRepr> for SupportPattern {
    type Error = Error;

    fn try_from(r: SupportRepr) -> Result<Self> {
        SupportPattern::from_pairs(r.m, r.pairs)
    }
}

impl From<SupportPattern> for SupportRepr {
    fn from(s: SupportPattern) -> Self {
        SupportRepr {
            m: s.m,
            pairs: s.upper.into_iter().collect(),
        }
    }
}

impl SupportPattern {
    pub fn diagonal(m: usize) -> Self {
        SupportPattern {
            m,
            upper: BTreeSet::new(),
        }
    }

    pub fn full(m: usize) -> Self {
        let upper = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect();
        SupportPattern { m, upper }
    }

    /// Builds a pattern from arbitrary pairs; mirrors are added and diagonal
    /// pairs are accepted but redundant.
    pub fn from_pairs<I>(m: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut upper = BTreeSet::new();
        for (i, j) in pairs {
            if i >= m || j >= m {
                return Err(Error::Dimension(format!(
                    "pair ({i}, {j}) out of range for m = {m}"
                )));
            }
            if i != j {
                upper.insert((i.min(j), i.max(j)));
            }
        }
        Ok(SupportPattern { m, upper })
    }

    /// Support of a set of matrices: pairs where any of them has an entry with
    /// magnitude above `tol` (in either orientation).
    pub fn from_matrices<'a, I>(m: usize, mats: I, tol: f64) -> Self
    where
        I: IntoIterator<Item = &'a DMatrix<f64>>,
    {
        let mut upper = BTreeSet::new();
        for a in mats {
            for i in 0..m {
                for j in i + 1..m {
                    if a[(i, j)].abs() > tol || a[(j, i)].abs() > tol {
                        upper.insert((i, j));
                    }
                }
            }
        }
        SupportPattern { m, upper }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i == j || self.upper.contains(&(i.min(j), i.max(j)))
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.upper.insert((i.min(j), i.max(j)));
        }
    }

    /// Off-diagonal pairs `(i, j)` with `i < j`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.upper.iter().copied()
    }

    pub fn num_upper_pairs(&self) -> usize {
        self.upper.len()
    }

    /// Number of entries of the m×m grid in the pattern, counting both
    /// orientations and the diagonal.
    pub fn cardinality(&self) -> usize {
        2 * self.upper.len() + self.m
    }

    /// 0/1 mask with ones on the support.
    pub fn mask(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, j| {
            if self.contains(i, j) {
                1.0
            } else {
                0.0
            }
        })
    }
}
