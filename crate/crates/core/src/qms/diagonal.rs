//! Diagonal (classical) densities stored as configuration weight tables.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, raw_diag_entropy, CMatrix, Operator};
use crate::tolerances::DIAGONAL_DIM_CAP;
use crate::tree::SiteSet;

pub(crate) fn diagonal_dim(sites: usize, d: usize) -> Result<usize> {
    let too_large = || Error::RegionTooLarge {
        sites,
        d,
        path: "diagonal",
    };
    let dim = d.checked_pow(sites as u32).ok_or_else(too_large)?;
    if dim > DIAGONAL_DIM_CAP {
        return Err(too_large());
    }
    Ok(dim)
}

/// Weights indexed by mixed-radix configurations of `support`, first site
/// most significant (the same layout as the dense diagonal).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalState {
    support: SiteSet,
    d: usize,
    weights: Vec<f64>,
}

impl DiagonalState {
    pub fn new(support: SiteSet, d: usize, weights: Vec<f64>) -> Result<Self> {
        let dim = diagonal_dim(support.len(), d)?;
        if weights.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: weights.len(),
            });
        }
        Ok(Self { support, d, weights })
    }

    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalized(&self) -> Self {
        let t = self.total();
        Self {
            support: self.support.clone(),
            d: self.d,
            weights: self.weights.iter().map(|w| w / t).collect(),
        }
    }

    /// Digit of site position `pos` in configuration `idx`.
    pub fn digit(&self, idx: usize, pos: usize) -> usize {
        let n = self.support.len();
        (idx / self.d.pow((n - 1 - pos) as u32)) % self.d
    }

    pub fn marginal(&self, keep: &SiteSet) -> Result<DiagonalState> {
        if !keep.is_subset(&self.support) {
            return Err(Error::KeepNotSubset);
        }
        let positions: Vec<usize> = keep
            .iter()
            .map(|v| self.support.position(v).unwrap())
            .collect();
        let mut out = vec![0.0; self.d.pow(keep.len() as u32)];
        for (idx, &w) in self.weights.iter().enumerate() {
            let mut k = 0;
            for &p in &positions {
                k = k * self.d + self.digit(idx, p);
            }
            out[k] += w;
        }
        DiagonalState::new(keep.clone(), self.d, out)
    }

    /// `-Σ w log w`; the von Neumann entropy when the weights sum to one.
    pub fn entropy(&self) -> Result<f64> {
        raw_diag_entropy(&self.weights)
    }

    /// `Tr(D a)`; only the diagonal of `a` contributes.
    pub fn expectation(&self, a: &Operator) -> Result<Complex64> {
        let m = self.marginal(a.support())?;
        Ok(m.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| a.matrix()[(i, i)] * w)
            .sum())
    }

    pub fn to_operator(&self) -> Result<Operator> {
        let diag = nalgebra::DVector::from_iterator(
            self.weights.len(),
            self.weights.iter().map(|&w| c(w)),
        );
        Operator::new(self.support.clone(), self.d, CMatrix::from_diagonal(&diag))
    }

    pub fn max_abs_diff(&self, other: &DiagonalState) -> Result<f64> {
        if self.support != other.support {
            return Err(Error::KeepNotSubset);
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }
}
