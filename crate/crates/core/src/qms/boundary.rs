use crate::error::{Error, Result};
use crate::linalg::{c, herm_eig_matrix, max_abs, trace_out_tail, CMatrix};
use crate::tolerances::{DENSITY_TOL, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL, LOG_FLOOR};
use crate::tree::TreeShape;

/// Translation-invariant boundary condition `h` together with the root
/// weight `ω_0`.
#[derive(Clone, Debug)]
pub struct BoundaryFamily {
    h: CMatrix,
    omega0: CMatrix,
}

fn check_positive(m: &CMatrix, strict: bool, what: &str) -> Result<f64> {
    let min = herm_eig_matrix(m, DENSITY_TOL)?.min();
    let bad = if strict { min <= LOG_FLOOR } else { min < -DENSITY_TOL };
    if bad {
        return Err(Error::InvalidParameter(format!(
            "{what} must be {}positive (min eigenvalue {min:.3e})",
            if strict { "strictly " } else { "" }
        )));
    }
    Ok(min)
}

impl BoundaryFamily {
    /// Requires `h > 0`, `ω_0 ≥ 0` and `Tr(ω_0 h) = 1`.
    pub fn new(h: CMatrix, omega0: CMatrix) -> Result<Self> {
        if h.nrows() != omega0.nrows() || !h.is_square() || !omega0.is_square() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: omega0.nrows(),
            });
        }
        check_positive(&h, true, "h")?;
        check_positive(&omega0, false, "omega0")?;
        let t = (&omega0 * &h).trace();
        if (t.re - 1.0).abs() > DENSITY_TOL || t.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("Tr(omega0 h) = {t}, expected 1")));
        }
        Ok(Self { h, omega0 })
    }

    /// Pairs `h` with `ω_0 = 1 / Tr(h)`, the scalar root weight satisfying
    /// the trace condition.
    pub fn with_consistent_root(h: CMatrix) -> Result<Self> {
        let d = h.nrows();
        let t = h.trace().re;
        Self::new(h, CMatrix::identity(d, d) * c(1.0 / t))
    }

    /// Skips the trace condition; used for deliberately inconsistent
    /// boundaries.
    pub fn unchecked(h: CMatrix, omega0: CMatrix) -> Result<Self> {
        check_positive(&h, true, "h")?;
        check_positive(&omega0, false, "omega0")?;
        Ok(Self { h, omega0 })
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn omega0(&self) -> &CMatrix {
        &self.omega0
    }

    pub fn d(&self) -> usize {
        self.h.nrows()
    }

    pub fn root_trace(&self) -> f64 {
        (&self.omega0 * &self.h).trace().re
    }
}

/// `h_1 ⊗ … ⊗ h_k` for the children of one block.
pub fn children_product(h: &CMatrix, k: usize) -> CMatrix {
    (1..k).fold(h.clone(), |acc, _| acc.kronecker(h))
}

/// `Tr_children(A (1 ⊗ h ⊗ … ⊗ h) A*)`.
pub fn boundary_map(triple: &CMatrix, h: &CMatrix, shape: &TreeShape) -> CMatrix {
    let d = shape.d;
    let hs = CMatrix::identity(d, d).kronecker(&children_product(h, shape.k));
    trace_out_tail(&(triple * hs * triple.adjoint()), d, 1, shape.k)
}

/// `‖Tr_children(A h…h A*) − h‖_max`.
pub fn boundary_residual(triple: &CMatrix, h: &CMatrix, shape: &TreeShape) -> f64 {
    max_abs(&(boundary_map(triple, h, shape) - h))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// `None` for plain iteration, otherwise the weight of the new iterate.
    pub damping: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: None,
            tol: FIXED_POINT_TOL,
            max_iter: FIXED_POINT_MAX_ITER,
        }
    }
}

impl SolverOptions {
    pub fn damped() -> Self {
        Self {
            damping: Some(0.5),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolvedBoundary {
    pub family: BoundaryFamily,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `Tr_children(A h…h A*) = h` by iterating the map on unit-trace
/// iterates and rescaling the limit direction.
///
/// For `k ≥ 2` the map is homogeneous of degree `k`, so a direction `u`
/// with `T(u) = λu` yields the fixed point `λ^{-1/(k-1)} u`. For `k = 1`
/// the map is linear and only `λ = 1` admits a fixed point.
pub fn solve_boundary(
    triple: &CMatrix,
    h0: &CMatrix,
    shape: &TreeShape,
    opts: SolverOptions,
) -> Result<SolvedBoundary> {
    let dim = shape.d.pow(shape.k as u32 + 1);
    if triple.nrows() != dim || h0.nrows() != shape.d {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: triple.nrows(),
        });
    }
    check_positive(h0, true, "initial guess")?;
    let gamma = opts.damping.unwrap_or(1.0);
    let mut u = h0 / h0.trace();
    let mut last_step = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let v = boundary_map(triple, &u, shape);
        let lambda = v.trace().re;
        if lambda <= 0.0 {
            return Err(Error::LostPositivity(lambda));
        }
        let next = &u * c(1.0 - gamma) + v * c(gamma / lambda);
        let min = herm_eig_matrix(&next, DENSITY_TOL)?.min();
        if min <= 0.0 {
            return Err(Error::LostPositivity(min));
        }
        last_step = max_abs(&(&next - &u));
        u = next;
        if last_step < opts.tol {
            let lambda = boundary_map(triple, &u, shape).trace().re;
            let h = if shape.k == 1 {
                if (lambda - 1.0).abs() > opts.tol.max(1e-10) {
                    return Err(Error::HypothesisViolated(format!(
                        "linear boundary map has leading eigenvalue {lambda}, no fixed point"
                    )));
                }
                u
            } else {
                &u * c(lambda.powf(-1.0 / (shape.k as f64 - 1.0)))
            };
            let residual = boundary_residual(triple, &h, shape);
            return Ok(SolvedBoundary {
                family: BoundaryFamily::with_consistent_root(h)?,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last_step,
    })
}
