use super::operator::{hermitian_defect, Operator};
use super::spectral::{herm_eig, herm_eig_matrix};
use crate::error::{Error, Result};
use crate::tolerances::DENSITY_TOL;

/// A validated density matrix: Hermitian, positive semidefinite and of unit
/// trace, each within `tolerance`.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: Operator,
    tolerance: f64,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerance(op, DENSITY_TOL)
    }

    pub fn with_tolerance(op: Operator, tolerance: f64) -> Result<Self> {
        let herm = hermitian_defect(op.matrix());
        if herm > tolerance {
            return Err(Error::InvalidDensity(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tolerance || tr.im.abs() > tolerance {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = herm_eig_matrix(op.matrix(), tolerance)?.min();
        if min < -tolerance {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op, tolerance })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

fn entropy_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// `-Σ λ log λ` with eigenvalues in `[-tol, 0)` clipped to zero. Fails on
/// more negative eigenvalues. Summed with Neumaier compensation so that
/// tables of `2^15` equal weights stay exact to a few ulps.
fn spectral_entropy(eigenvalues: &[f64], tol: f64) -> Result<f64> {
    let (mut s, mut comp) = (0.0_f64, 0.0_f64);
    for &x in eigenvalues {
        if x < -tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {x:.3e}")));
        }
        let t = entropy_term(x);
        let sum = s + t;
        comp += if s.abs() >= t.abs() { (s - sum) + t } else { (t - sum) + s };
        s = sum;
    }
    Ok(s + comp)
}

/// `S(ρ) = -Tr ρ log ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let spec = herm_eig(rho.operator())?;
    spectral_entropy(&spec.eigenvalues, rho.tolerance())
}

/// `-Tr(w log w)` for a positive semidefinite operator of any trace.
///
/// Used for raw (unnormalized) boundary-conditioned densities; coincides
/// with [`von_neumann_entropy`] on unit-trace input.
pub fn operator_entropy(w: &Operator) -> Result<f64> {
    let spec = herm_eig(w)?;
    let scale = spec.eigenvalues.first().copied().unwrap_or(0.0).abs().max(1.0);
    spectral_entropy(&spec.eigenvalues, DENSITY_TOL * scale)
}

/// Entropy of `diag(weights)` without materializing a matrix.
pub fn diag_fast_entropy(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > DENSITY_TOL * (weights.len() as f64).max(1.0) {
        return Err(Error::NotNormalized(total));
    }
    spectral_entropy(weights, DENSITY_TOL)
}

/// `-Σ w log w` for nonnegative weights of any total.
pub fn raw_diag_entropy(weights: &[f64]) -> Result<f64> {
    let scale = weights.iter().fold(1.0_f64, |a, &w| a.max(w.abs()));
    spectral_entropy(weights, DENSITY_TOL * scale)
}
