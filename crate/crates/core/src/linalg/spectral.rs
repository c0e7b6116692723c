//! Hermitian eigendecomposition and functional calculus.

use nalgebra::{DVector, SymmetricEigen};

use super::operator::{c, hermitian_defect, max_abs, CMatrix, Operator};
use crate::error::{Error, Result};
use crate::tolerances::{DENSITY_TOL, LOG_FLOOR};

/// Eigenvalues in descending order with the matching unitary eigenvectors
/// as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|x| x)
    }

    /// `U f(Λ) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let diag = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| c(f(x))),
        );
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= diag[j];
        }
        scaled * u.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn herm_eig_matrix(a: &CMatrix, tol: f64) -> Result<Spectrum> {
    let defect = hermitian_defect(a);
    let scale = max_abs(a).max(1.0);
    if defect > tol * scale {
        return Err(Error::NotHermitian(defect));
    }
    let sym = (a + a.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = a.nrows();
    let eigenvectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

pub fn herm_eig(a: &Operator) -> Result<Spectrum> {
    herm_eig_matrix(a.matrix(), DENSITY_TOL)
}

pub fn herm_exp_matrix(a: &CMatrix) -> Result<CMatrix> {
    Ok(herm_eig_matrix(a, DENSITY_TOL)?.apply(f64::exp))
}

pub fn herm_log_matrix(a: &CMatrix) -> Result<CMatrix> {
    let spec = herm_eig_matrix(a, DENSITY_TOL)?;
    if spec.min() <= LOG_FLOOR {
        return Err(Error::NonPositiveSpectrum(spec.min()));
    }
    Ok(spec.apply(f64::ln))
}

/// `a^p` for positive semidefinite `a`; tiny negative eigenvalues are
/// clipped.
pub fn herm_pow_matrix(a: &CMatrix, p: f64) -> Result<CMatrix> {
    let spec = herm_eig_matrix(a, DENSITY_TOL)?;
    let scale = spec.eigenvalues.first().map(|x| x.abs()).unwrap_or(1.0).max(1.0);
    if spec.min() < -DENSITY_TOL * scale {
        return Err(Error::NonPositiveSpectrum(spec.min()));
    }
    if p < 0.0 && spec.min() <= LOG_FLOOR {
        return Err(Error::NonPositiveSpectrum(spec.min()));
    }
    Ok(spec.apply(|x| x.max(0.0).powf(p)))
}

pub fn herm_exp(a: &Operator) -> Result<Operator> {
    let m = herm_exp_matrix(a.matrix())?;
    Operator::new(a.support().clone(), a.d(), m)
}

pub fn herm_log(a: &Operator) -> Result<Operator> {
    let m = herm_log_matrix(a.matrix())?;
    Operator::new(a.support().clone(), a.d(), m)
}

/// `|a| = (a* a)^{1/2}`.
pub fn abs_matrix(a: &CMatrix) -> Result<CMatrix> {
    herm_pow_matrix(&(a.adjoint() * a), 0.5)
}
