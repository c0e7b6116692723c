//! Ising-type quantum Markov states on the binary Cayley tree.
//!
//! Spin up is basis index 0; triple configurations are enumerated
//! parent-major as `(parent, child 1, child 2)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, herm_exp_matrix, max_abs, CMatrix, Operator};
use crate::qms::{
    boundary_residual, solve_boundary, BoundaryFamily, DiagonalState, QmsModel, SolverOptions,
};
use crate::tolerances::{BOUNDARY_RESIDUAL_TOL, DIAGONAL_DIM_CAP};
use crate::tree::{ball, SiteSet, TreeShape, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "h1")]
    H1,
    #[serde(rename = "h2")]
    H2,
    #[serde(rename = "h_alpha")]
    HAlpha,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::H1 => "h1",
            Branch::H2 => "h2",
            Branch::HAlpha => "h_alpha",
        })
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "h1" | "h_1" => Ok(Branch::H1),
            "h2" | "h_2" => Ok(Branch::H2),
            "h_alpha" | "halpha" | "alpha" => Ok(Branch::HAlpha),
            other => Err(Error::InvalidParameter(format!(
                "unknown branch '{other}' (expected h1, h2 or h_alpha)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub beta: f64,
    pub j: f64,
    pub branch: Branch,
}

impl IsingParams {
    pub fn new(beta: f64, j: f64, branch: Branch) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidParameter(format!("J must be > 0, got {j}")));
        }
        Ok(Self { beta, j, branch })
    }

    pub fn alpha(beta: f64, j: f64) -> Result<Self> {
        Self::new(beta, j, Branch::HAlpha)
    }

    fn theta(&self) -> f64 {
        (2.0 * self.beta).exp()
    }

    fn eta(&self) -> f64 {
        (2.0 * self.beta * self.j).exp()
    }
}

pub fn shape() -> TreeShape {
    TreeShape::new(2, 2).expect("valid shape")
}

/// Multiplicity of aligned pairs per triple: (parent-child 1, parent-child 2, child-child).
fn alignments(idx: usize) -> (bool, bool, bool) {
    let (p, c1, c2) = (idx >> 2, (idx >> 1) & 1, idx & 1);
    (p == c1, p == c2, c1 == c2)
}

/// Exponents `μ_i` of `|A|²`: `2β(J+2), 2β, 2β, 2βJ, 2βJ, 2β, 2β, 2β(J+2)`.
pub fn mu(p: &IsingParams) -> [f64; 8] {
    std::array::from_fn(|i| {
        let (a, b, cc) = alignments(i);
        2.0 * p.beta * (a as u8 as f64 + b as u8 as f64 + p.j * cc as u8 as f64)
    })
}

/// `Z = e^{2β(J+2)} + 2 e^{2β} + e^{2βJ}`, the sum of `|A|²` over the
/// children of a fixed parent.
pub fn partition_sum(p: &IsingParams) -> f64 {
    let (theta, eta) = (p.theta(), p.eta());
    theta * theta * eta + 2.0 * theta + eta
}

/// `α = 4 / (e^{2Jβ}(e^{4β} + 1) + 2e^{2β})`.
pub fn alpha_of(p: &IsingParams) -> f64 {
    let (b, j) = (p.beta, p.j);
    4.0 / ((2.0 * j * b).exp() * ((4.0 * b).exp() + 1.0) + 2.0 * (2.0 * b).exp())
}

/// `Σ_i α e^{μ_i}`; equals 8.
pub fn normalization_sum(p: &IsingParams) -> f64 {
    let a = alpha_of(p);
    mu(p).iter().map(|m| a * m.exp()).sum()
}

#[derive(Clone, Debug)]
pub struct IsingAmplitudes {
    /// `exp(βH)` on (parent, child).
    pub k_edge: CMatrix,
    /// `exp(JβH)` on (child 1, child 2).
    pub l_edge: CMatrix,
    /// `K_{x,(x,1)} K_{x,(x,2)} L_{(x,1),(x,2)}` on the triple.
    pub triple: CMatrix,
}

/// `H = ½(1⊗1 + σ_z⊗σ_z)` on two sites.
fn pair_hamiltonian() -> CMatrix {
    let z = crate::linalg::pauli::z();
    (CMatrix::identity(4, 4) + z.kronecker(&z)) * c(0.5)
}

pub fn build_amplitudes(p: &IsingParams) -> Result<IsingAmplitudes> {
    let h = pair_hamiltonian();
    let k_edge = herm_exp_matrix(&(&h * c(p.beta)))?;
    let l_edge = herm_exp_matrix(&(&h * c(p.j * p.beta)))?;
    let (root, c1, c2) = (Vertex::root(), Vertex::new(vec![1]), Vertex::new(vec![2]));
    let pair = |a: &Vertex, b: &Vertex, m: &CMatrix| {
        Operator::new(SiteSet::new(vec![a.clone(), b.clone()]), 2, m.clone())
    };
    let block = ball(1, &shape());
    let a = pair(&root, &c1, &k_edge)?
        .extend_to(&block)?
        .mul(&pair(&root, &c2, &k_edge)?.extend_to(&block)?)?
        .mul(&pair(&c1, &c2, &l_edge)?.extend_to(&block)?)?;
    Ok(IsingAmplitudes {
        k_edge,
        l_edge,
        triple: a.into_matrix(),
    })
}

/// Diagonal of the triple Hamiltonian `H_α = log α + μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripleHamiltonian {
    pub diag8: [f64; 8],
}

impl TripleHamiltonian {
    /// `α e^{μ_i}`; sums to 8.
    pub fn exp_diag(&self) -> [f64; 8] {
        self.diag8.map(f64::exp)
    }

    /// `q_i = α e^{μ_i} / 8`.
    pub fn probabilities(&self) -> [f64; 8] {
        let e = self.exp_diag();
        let total: f64 = e.iter().sum();
        e.map(|x| x / total)
    }

    /// `φ(H_α) = Σ q_i (log α + μ_i)`.
    pub fn mean(&self) -> f64 {
        self.probabilities()
            .iter()
            .zip(&self.diag8)
            .map(|(q, h)| q * h)
            .sum()
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(8, self.diag8.iter().map(|&x| c(x))))
    }
}

pub fn triple_hamiltonian(p: &IsingParams) -> TripleHamiltonian {
    let la = alpha_of(p).ln();
    TripleHamiltonian {
        diag8: mu(p).map(|m| la + m),
    }
}

/// Normalized `exp(Σ H_α)` on `Λ_n` plus the raw trace it was divided by.
#[derive(Clone, Debug)]
pub struct WeightTable {
    pub state: DiagonalState,
    pub raw_total: f64,
}

impl WeightTable {
    /// `0` for spin up, `1` for spin down, canonical site order.
    pub fn bitstring(&self, idx: usize) -> String {
        (0..self.state.support().len())
            .map(|pos| if self.state.digit(idx, pos) == 0 { '0' } else { '1' })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "# raw_total: {:.15e}", self.raw_total)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["configuration", "weight"])?;
        for (i, x) in self.state.weights().iter().enumerate() {
            w.write_record([self.bitstring(i), format!("{x:.15e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Level-`n` configuration weights of the symmetric state: the product of
/// `α e^{μ}` over the parent triples of `Λ_{n-1}`, normalized.
pub fn classical_weights(p: &IsingParams, n: usize) -> Result<WeightTable> {
    let s = shape();
    let region = ball(n, &s);
    if region.len() >= usize::BITS as usize || 1usize << region.len() > DIAGONAL_DIM_CAP {
        return Err(Error::RegionTooLarge {
            sites: region.len(),
            d: 2,
            path: "diagonal",
        });
    }
    let factors = triple_hamiltonian(p).exp_diag();
    let sites = region.len();
    let parents = if n == 0 { 0 } else { s.ball_size(n - 1) };
    let raw: Vec<f64> = (0..1usize << sites)
        .map(|idx| {
            let spin = |pos: usize| (idx >> (sites - 1 - pos)) & 1;
            // in canonical order the children of the vertex at position i
            // sit at positions 2i+1 and 2i+2
            (0..parents)
                .map(|i| factors[(spin(i) << 2) | (spin(2 * i + 1) << 1) | spin(2 * i + 2)])
                .product()
        })
        .collect();
    let raw_total: f64 = raw.iter().sum();
    let state = DiagonalState::new(region, 2, raw.iter().map(|w| w / raw_total).collect())?;
    Ok(WeightTable { state, raw_total })
}

/// `2η(θ² − 1)/Z > 1`: slope of the projective boundary map at the
/// symmetric point, beyond which the two asymmetric solutions appear.
pub fn asymmetric_branches_exist(p: &IsingParams) -> bool {
    let (theta, eta) = (p.theta(), p.eta());
    2.0 * eta * (theta * theta - 1.0) / partition_sum(p) > 1.0
}

/// `h_α = (α/4)·1`.
pub fn h_alpha(p: &IsingParams) -> CMatrix {
    CMatrix::identity(2, 2) * c(alpha_of(p) / 4.0)
}

fn diag2(a: f64, b: f64) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_vec(vec![c(a), c(b)]))
}

#[derive(Clone, Debug)]
pub struct BoundaryPresets {
    pub h1: BoundaryFamily,
    pub h2: BoundaryFamily,
    pub h_alpha: BoundaryFamily,
}

fn solve_branch(p: &IsingParams, branch: Branch) -> Result<BoundaryFamily> {
    let a = build_amplitudes(p)?.triple;
    let s = shape();
    let h0 = match branch {
        Branch::HAlpha => diag2(0.5, 0.5),
        Branch::H1 => diag2(0.9, 0.1),
        Branch::H2 => diag2(0.1, 0.9),
    };
    let sol = solve_boundary(&a, &h0, &s, SolverOptions::default()).map_err(|e| match (branch, e) {
        (Branch::HAlpha, e) => e,
        (_, e) => Error::BranchNotFound(format!("{branch} at beta={}, J={}: {e}", p.beta, p.j)),
    })?;
    if sol.residual > BOUNDARY_RESIDUAL_TOL {
        return Err(Error::BranchNotFound(format!(
            "{branch}: residual {:.3e} above tolerance",
            sol.residual
        )));
    }
    if branch != Branch::HAlpha {
        let ha = h_alpha(p);
        if max_abs(&(sol.family.h() - &ha)) < 1e-6 * max_abs(&ha) {
            return Err(Error::BranchNotFound(format!(
                "{branch} collapses onto h_alpha at beta={}, J={} (no asymmetric solution)",
                p.beta, p.j
            )));
        }
    }
    stationary_root(&a, sol.family.h())
}

/// Boundary family whose root marginal `ω_0^{1/2} h ω_0^{1/2}` is the
/// stationary law of the parent-to-child chain, so the state is translation
/// invariant. `Tr(ω_0 h) = 1` holds by construction; for `h ∝ 1` this is
/// `ω_0 = 1/Tr h`.
fn stationary_root(a: &CMatrix, h: &CMatrix) -> Result<BoundaryFamily> {
    let trial = QmsModel::from_boundary(shape(), a.clone(), BoundaryFamily::with_consistent_root(h.clone())?)?;
    let w = trial
        .rule()
        .transition_weights()
        .ok_or_else(|| Error::HypothesisViolated("ising rule is not diagonal".into()))?;
    // weights indexed 4·s0 + 2·s1 + s2; the two children are exchangeable
    let step = |s0: usize, s1: usize| w[4 * s0 + 2 * s1] + w[4 * s0 + 2 * s1 + 1];
    let (up_down, down_up) = (step(0, 1), step(1, 0));
    let nu_up = down_up / (up_down + down_up);
    BoundaryFamily::new(
        h.clone(),
        diag2(nu_up / h[(0, 0)].re, (1.0 - nu_up) / h[(1, 1)].re),
    )
}

/// All three translation-invariant boundary solutions.
pub fn boundary_presets(p: &IsingParams) -> Result<BoundaryPresets> {
    Ok(BoundaryPresets {
        h1: solve_branch(p, Branch::H1)?,
        h2: solve_branch(p, Branch::H2)?,
        h_alpha: solve_branch(p, Branch::HAlpha)?,
    })
}

/// Boundary family of the requested branch.
pub fn boundary_for(p: &IsingParams) -> Result<BoundaryFamily> {
    solve_branch(p, p.branch)
}

pub fn ising_model(p: &IsingParams) -> Result<QmsModel> {
    let a = build_amplitudes(p)?.triple;
    QmsModel::from_boundary(shape(), a, boundary_for(p)?)
}

/// Same amplitude with an arbitrary boundary `h` and `ω_0 = 1/Tr h`.
pub fn ising_model_with_boundary(p: &IsingParams, h: CMatrix) -> Result<QmsModel> {
    let a = build_amplitudes(p)?.triple;
    QmsModel::from_boundary(shape(), a, BoundaryFamily::with_consistent_root(h)?)
}

pub fn boundary_residual_of(p: &IsingParams, h: &CMatrix) -> Result<f64> {
    Ok(boundary_residual(&build_amplitudes(p)?.triple, h, &shape()))
}

/// `a((log a + 2β(J+2)) e^{2β(J+2)} + 2(log a + 2β) e^{2β} + (log a + 2βJ) e^{2βJ})`.
pub fn scalar_sum(p: &IsingParams, a: f64) -> f64 {
    let (b, j) = (p.beta, p.j);
    let la = a.ln();
    a * ((la + 2.0 * b * (j + 2.0)) * (2.0 * b * (j + 2.0)).exp()
        + 2.0 * (la + 2.0 * b) * (2.0 * b).exp()
        + (la + 2.0 * b * j) * (2.0 * b * j).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosedForm {
    /// Mean entropy `−½ D(α/4)` where `D` is [`scalar_sum`].
    pub value: f64,
    pub chosen: Sign,
    /// `+½ D(α/4)` and `−½ D(α/4)`.
    pub plus: f64,
    pub minus: f64,
    /// [`scalar_sum`] evaluated at `α` itself, with both signs.
    pub literal_plus: f64,
    pub literal_minus: f64,
}

/// Mean entropy of the symmetric state in closed form.
///
/// [`scalar_sum`] is evaluated at the boundary scale `α/4 = 1/Z`, where
/// the per-triple weights form a conditional probability, and halved. Of the
/// two signs exactly one is non-negative; that one is returned.
pub fn ising_closed_form(p: &IsingParams) -> ClosedForm {
    let a = alpha_of(p);
    let half = 0.5 * scalar_sum(p, a / 4.0);
    let literal = scalar_sum(p, a);
    let (plus, minus) = (half, -half);
    let (value, chosen) = if minus >= 0.0 {
        (minus, Sign::Minus)
    } else {
        (plus, Sign::Plus)
    };
    ClosedForm {
        value,
        chosen,
        plus,
        minus,
        literal_plus: literal,
        literal_minus: -literal,
    }
}

/// Factorized level entropy of the symmetric state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FactorizedEntropy {
    /// `|Λ_n| log 2 − |Λ_{n−1}| φ(H_α)`.
    pub normalized: f64,
    /// `−|Λ_{n−1}| φ(H_α)` without the uniform-reference term.
    pub literal: f64,
    /// `Tr exp(Σ H_α) = 2·4^{|Λ_{n−1}|}`.
    pub raw_trace: f64,
}

pub fn factorized_entropy(p: &IsingParams, n: usize) -> FactorizedEntropy {
    let s = shape();
    let parents = if n == 0 { 0 } else { s.ball_size(n - 1) };
    let mean = triple_hamiltonian(p).mean();
    FactorizedEntropy {
        normalized: s.ball_size(n) as f64 * std::f64::consts::LN_2 - parents as f64 * mean,
        literal: -(parents as f64) * mean,
        raw_trace: 2.0 * 4f64.powi(parents as i32),
    }
}

/// Which sign is non-negative at each grid point; `Some` when one sign wins
/// everywhere.
pub fn sign_audit(points: &[(f64, f64)]) -> Result<Option<Sign>> {
    let mut seen = None;
    for &(b, j) in points {
        let cf = ising_closed_form(&IsingParams::alpha(b, j)?);
        if (cf.plus >= 0.0) == (cf.minus >= 0.0) && cf.plus != 0.0 {
            return Ok(None);
        }
        match seen {
            None => seen = Some(cf.chosen),
            Some(s) if s != cf.chosen => return Ok(None),
            _ => {}
        }
    }
    Ok(seen)
}
