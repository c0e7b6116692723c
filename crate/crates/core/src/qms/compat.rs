use serde::Serialize;

use super::diagonal::DiagonalState;
use super::model::{advance_density, FiniteState, LevelDensity, Path, QmsModel};
use crate::error::Result;
use crate::linalg::testing::{random_hermitian, rng};
use crate::linalg::{trace_of_product, CMatrix};
use crate::tolerances::{COMPATIBILITY_TOL, MATRIX_UNIT_MAX_DIM, RANDOM_OBSERVABLES};
use crate::tree::ball;

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityRow {
    pub n: usize,
    /// Max over test observables `a` on `Λ_{n+1}` of `|φ^{(n)}(E_{Λ_n}(a)) − φ^{(n+1)}(a)|`.
    pub functional_defect: f64,
    /// `‖Tr_{W_{n+1}} D_{n+1} − D_n‖_max` for the recursion densities.
    pub marginal_defect: f64,
    /// `‖D_n − ρ_n‖_max` between recursion and boundary functional.
    pub recursion_defect: f64,
    pub trace_n: f64,
    pub trace_n1: f64,
    /// "matrix-units" or "random-hermitian".
    pub basis: &'static str,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    pub path: Path,
    pub rows: Vec<CompatibilityRow>,
}

impl CompatibilityReport {
    pub fn max_functional_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.functional_defect).fold(0.0, f64::max)
    }

    pub fn max_marginal_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.marginal_defect).fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        !self.rows.is_empty()
            && self.rows.iter().all(|r| {
                r.note.is_none() && r.functional_defect <= tol && r.marginal_defect <= tol
            })
    }

    pub fn passed_default(&self) -> bool {
        self.passed(COMPATIBILITY_TOL)
    }
}

/// `max_a |Tr(Δ a)|` over the matrix units when small, otherwise over
/// seeded random Hermitian observables.
fn test_basis_defect(delta: &LevelDensity, seed: u64) -> Result<(f64, &'static str)> {
    match delta {
        LevelDensity::Diagonal(st) => Ok((
            st.weights().iter().fold(0.0, |a, w| a.max(w.abs())),
            "matrix-units",
        )),
        LevelDensity::Dense(op) => {
            let m = op.matrix();
            if m.nrows() <= MATRIX_UNIT_MAX_DIM {
                Ok((crate::linalg::max_abs(m), "matrix-units"))
            } else {
                let mut r = rng(seed);
                let mut worst = 0.0_f64;
                for _ in 0..RANDOM_OBSERVABLES {
                    let a: CMatrix = random_hermitian(&mut r, m.nrows());
                    worst = worst.max(trace_of_product(m, &a).norm());
                }
                Ok((worst, "random-hermitian"))
            }
        }
    }
}

fn difference(a: &LevelDensity, b: &LevelDensity) -> Result<LevelDensity> {
    Ok(match (a, b) {
        (LevelDensity::Diagonal(x), LevelDensity::Diagonal(y)) => LevelDensity::Diagonal(
            DiagonalState::new(
                x.support().clone(),
                x.d(),
                x.weights().iter().zip(y.weights()).map(|(p, q)| p - q).collect(),
            )?,
        ),
        _ => LevelDensity::Dense(a.to_dense()?.sub(&b.to_dense()?)?),
    })
}

fn row(model: &QmsModel, n: usize, path: Path, seed: u64) -> Result<CompatibilityRow> {
    let rho_n = model.functional_density(n, path)?;
    let rho_n1 = model.functional_density(n + 1, path)?;
    // φ^{(n)} ∘ E_{Λ_n} has density K ρ_n K*
    let pushed = advance_density(
        &FiniteState {
            level: n,
            density: rho_n.density.clone(),
            raw_trace: rho_n.raw_trace,
        },
        model.rule(),
    )?;
    let delta = difference(&pushed.density, &rho_n1.density)?;
    let (functional_defect, basis) = test_basis_defect(&delta, seed.wrapping_add(n as u64))?;

    let states = model.level_states(n + 1, path)?;
    let marg = states[n + 1].density.marginal(&ball(n, &model.shape()))?;
    let marginal_defect = marg.max_abs_diff(&states[n].density)?;
    let recursion_defect = states[n].density.max_abs_diff(&rho_n.density)?;
    Ok(CompatibilityRow {
        n,
        functional_defect,
        marginal_defect,
        recursion_defect,
        trace_n: states[n].raw_trace,
        trace_n1: states[n + 1].raw_trace,
        basis,
        note: None,
    })
}

/// Checks `φ^{(n)} ∘ E_{Λ_n} = φ^{(n+1)}` and marginal consistency for
/// `n < n_max`. Levels that cannot be evaluated are reported with a note
/// and NaN defects.
pub fn check_compatibility(model: &QmsModel, n_max: usize, path: Path, seed: u64) -> CompatibilityReport {
    let resolved = model.resolve_path(path, n_max + 1).unwrap_or(path);
    let rows = (0..n_max)
        .map(|n| {
            row(model, n, resolved, seed).unwrap_or_else(|e| CompatibilityRow {
                n,
                functional_defect: f64::NAN,
                marginal_defect: f64::NAN,
                recursion_defect: f64::NAN,
                trace_n: f64::NAN,
                trace_n1: f64::NAN,
                basis: "none",
                note: Some(e.to_string()),
            })
        })
        .collect();
    CompatibilityReport {
        path: resolved,
        rows,
    }
}

/// `max_j ‖D_{n+1}|_{α_j(Λ_n)} − D_n‖_max` over the `k` subtree shifts.
pub fn translation_invariance_defect(model: &QmsModel, n: usize, path: Path) -> Result<f64> {
    let shape = model.shape();
    let states = model.level_states(n + 1, path)?;
    let base = ball(n, &shape);
    let mut worst = 0.0_f64;
    for j in 1..=shape.k {
        let g = crate::tree::Vertex::new(vec![j]);
        let shifted = states[n + 1].density.marginal(&base.shifted(&g))?;
        // shifting preserves canonical order, so the matrices align
        let diff = match (&shifted, &states[n].density) {
            (LevelDensity::Diagonal(a), LevelDensity::Diagonal(b)) => a
                .weights()
                .iter()
                .zip(b.weights())
                .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs())),
            (a, b) => crate::linalg::max_abs(&(a.to_dense()?.matrix() - b.to_dense()?.matrix())),
        };
        worst = worst.max(diff);
    }
    Ok(worst)
}
