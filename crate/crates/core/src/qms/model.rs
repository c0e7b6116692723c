use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::boundary::{children_product, BoundaryFamily};
use super::diagonal::{diagonal_dim, DiagonalState};
use super::rule::{level_amplitude, TransitionRule};
use crate::error::{Error, Result};
use crate::linalg::{
    c, dense_dim, herm_pow_matrix, is_diagonal, kron, operator_entropy, partial_trace, CMatrix,
    DensityMatrix, Operator,
};
use crate::tree::{ball, level_set, TreeShape, Vertex};

/// Computation strategy for level densities and entropies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Auto,
    Dense,
    Diagonal,
    Factorized,
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Path::Auto => "auto",
            Path::Dense => "dense",
            Path::Diagonal => "diagonal",
            Path::Factorized => "factorized",
        })
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Path::Auto),
            "dense" => Ok(Path::Dense),
            "diagonal" => Ok(Path::Diagonal),
            "factorized" => Ok(Path::Factorized),
            other => Err(Error::InvalidParameter(format!("unknown path '{other}'"))),
        }
    }
}

/// A density on a finite region, stored densely or as a diagonal table.
#[derive(Clone, Debug)]
pub enum LevelDensity {
    Dense(Operator),
    Diagonal(DiagonalState),
}

impl LevelDensity {
    pub fn path(&self) -> Path {
        match self {
            LevelDensity::Dense(_) => Path::Dense,
            LevelDensity::Diagonal(_) => Path::Diagonal,
        }
    }

    pub fn support(&self) -> &crate::tree::SiteSet {
        match self {
            LevelDensity::Dense(op) => op.support(),
            LevelDensity::Diagonal(st) => st.support(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            LevelDensity::Dense(op) => op.trace().re,
            LevelDensity::Diagonal(st) => st.total(),
        }
    }

    pub fn scaled(&self, s: f64) -> LevelDensity {
        match self {
            LevelDensity::Dense(op) => LevelDensity::Dense(op.scale(c(s))),
            LevelDensity::Diagonal(st) => LevelDensity::Diagonal(
                DiagonalState::new(
                    st.support().clone(),
                    st.d(),
                    st.weights().iter().map(|w| w * s).collect(),
                )
                .expect("same shape"),
            ),
        }
    }

    pub fn normalized(&self) -> LevelDensity {
        self.scaled(1.0 / self.trace())
    }

    pub fn marginal(&self, keep: &crate::tree::SiteSet) -> Result<LevelDensity> {
        Ok(match self {
            LevelDensity::Dense(op) => LevelDensity::Dense(partial_trace(op, keep)?),
            LevelDensity::Diagonal(st) => LevelDensity::Diagonal(st.marginal(keep)?),
        })
    }

    /// `-Tr(D log D)`; the von Neumann entropy for unit-trace densities.
    pub fn entropy(&self) -> Result<f64> {
        match self {
            LevelDensity::Dense(op) => operator_entropy(op),
            LevelDensity::Diagonal(st) => st.entropy(),
        }
    }

    /// `Tr(D a)` for `a` supported inside the region.
    pub fn expectation(&self, a: &Operator) -> Result<Complex64> {
        if !a.support().is_subset(self.support()) {
            return Err(Error::NotInRegion(format!("{:?}", a.support().vertices())));
        }
        match self {
            LevelDensity::Dense(op) => op.trace_product(a),
            LevelDensity::Diagonal(st) => st.expectation(a),
        }
    }

    pub fn to_dense(&self) -> Result<Operator> {
        match self {
            LevelDensity::Dense(op) => Ok(op.clone()),
            LevelDensity::Diagonal(st) => st.to_operator(),
        }
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.to_dense()?)
    }

    /// Entrywise max distance; mixed representations compare as dense.
    pub fn max_abs_diff(&self, other: &LevelDensity) -> Result<f64> {
        match (self, other) {
            (LevelDensity::Diagonal(a), LevelDensity::Diagonal(b)) => a.max_abs_diff(b),
            _ => self.to_dense()?.max_abs_diff(&other.to_dense()?),
        }
    }
}

/// Level-`n` density together with its raw trace and producing path.
#[derive(Clone, Debug)]
pub struct FiniteState {
    pub level: usize,
    pub density: LevelDensity,
    /// Trace before optional normalization.
    pub raw_trace: f64,
}

impl FiniteState {
    pub fn path(&self) -> Path {
        self.density.path()
    }
}

/// One step `D ↦ K_{[n,n+1]} (D ⊗ 1) K*_{[n,n+1]}`, no normalization.
pub fn advance_density(state: &FiniteState, rule: &TransitionRule) -> Result<FiniteState> {
    let n = state.level;
    let shape = rule.shape();
    let density = match &state.density {
        LevelDensity::Dense(d) => {
            let target = ball(n + 1, &shape);
            dense_dim(target.len(), shape.d)?;
            let k = level_amplitude(rule, n)?.extend_to(&target)?;
            let de = d.extend_to(&target)?;
            LevelDensity::Dense(k.mul(&de)?.mul(&k.adjoint())?)
        }
        LevelDensity::Diagonal(st) => {
            let w = rule.transition_weights().ok_or_else(|| {
                Error::StrategyInapplicable("diagonal path needs a diagonal rule".into())
            })?;
            LevelDensity::Diagonal(diagonal_advance(st, &w, &shape)?)
        }
    };
    let raw_trace = density.trace();
    Ok(FiniteState {
        level: n + 1,
        density,
        raw_trace,
    })
}

/// Appends the next generation: `w'(σ) = w(σ|Λ_n) Π_{x ∈ W_n} table[σ_x, σ_{S(x)}]`.
pub(crate) fn diagonal_advance(
    st: &DiagonalState,
    table: &[f64],
    shape: &TreeShape,
) -> Result<DiagonalState> {
    let (k, d) = (shape.k, shape.d);
    let n = st.support().iter().map(Vertex::level).max().unwrap_or(0);
    let target = ball(n + 1, shape);
    diagonal_dim(target.len(), d)?;
    let parents = shape.level_size(n);
    let leaves = parents * k;
    let block = d.pow(k as u32);
    let leaf_dim = d.pow(leaves as u32);
    let mut out = Vec::with_capacity(st.weights().len() * leaf_dim);
    for (idx, &w) in st.weights().iter().enumerate() {
        // parent spins are the trailing digits of the level-n configuration
        let mut ps = vec![0; parents];
        let mut rest = idx;
        for p in ps.iter_mut().rev() {
            *p = rest % d;
            rest /= d;
        }
        for leaf in 0..leaf_dim {
            let mut prod = w;
            let mut rest = leaf;
            for j in (0..parents).rev() {
                let kids = rest % block;
                rest /= block;
                prod *= table[ps[j] * block + kids];
            }
            out.push(prod);
        }
    }
    DiagonalState::new(target, d, out)
}

/// A quantum Markov state built from a per-triple amplitude `A`, a boundary
/// family `(h, ω_0)` and the derived transition rule
/// `K = h_S^{1/2} A* h_x^{-1/2}`.
#[derive(Clone, Debug)]
pub struct QmsModel {
    shape: TreeShape,
    triple: CMatrix,
    boundary: BoundaryFamily,
    rule: TransitionRule,
    normalize: bool,
}

impl QmsModel {
    pub fn from_boundary(shape: TreeShape, triple: CMatrix, boundary: BoundaryFamily) -> Result<Self> {
        let dim = shape.d.pow(shape.k as u32 + 1);
        if triple.nrows() != dim || triple.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: triple.nrows(),
            });
        }
        if boundary.d() != shape.d {
            return Err(Error::DimensionMismatch {
                expected: shape.d,
                got: boundary.d(),
            });
        }
        let d = shape.d;
        let h_half = herm_pow_matrix(boundary.h(), 0.5)?;
        let h_inv_half = herm_pow_matrix(boundary.h(), -0.5)?;
        let id_s = CMatrix::identity(d.pow(shape.k as u32), d.pow(shape.k as u32));
        let hs_half = CMatrix::identity(d, d).kronecker(&children_product(&h_half, shape.k));
        let hx_inv_half = h_inv_half.kronecker(&id_s);
        let k = hs_half * triple.adjoint() * hx_inv_half;
        let rule = TransitionRule::unchecked(shape, k)?;
        Ok(Self {
            shape,
            triple,
            boundary,
            rule,
            normalize: false,
        })
    }

    /// Model driven by a transition rule directly: `A = K*`, `h = 1` and
    /// `ω_0` the initial root density.
    pub fn from_rule(rule: TransitionRule, initial: CMatrix) -> Result<Self> {
        let shape = rule.shape();
        let root = Operator::new(
            crate::tree::SiteSet::singleton(Vertex::root()),
            shape.d,
            initial.clone(),
        )?;
        DensityMatrix::new(root)?;
        let boundary = BoundaryFamily::new(CMatrix::identity(shape.d, shape.d), initial)?;
        Ok(Self {
            shape,
            triple: rule.amplitude().adjoint(),
            boundary,
            rule,
            normalize: false,
        })
    }

    /// Trace state: maximally mixed root and `K = d^{-k/2} 1`.
    pub fn trace_state(shape: TreeShape) -> Self {
        let d = shape.d;
        Self::from_rule(
            TransitionRule::trace_state(shape),
            CMatrix::identity(d, d) * c(1.0 / d as f64),
        )
        .expect("maximally mixed root is a density")
    }

    /// Opt-in renormalization of level densities to unit trace.
    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn triple(&self) -> &CMatrix {
        &self.triple
    }

    pub fn boundary(&self) -> &BoundaryFamily {
        &self.boundary
    }

    pub fn rule(&self) -> &TransitionRule {
        &self.rule
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.triple, 0.0)
            && is_diagonal(self.boundary.h(), 0.0)
            && is_diagonal(self.boundary.omega0(), 0.0)
    }

    /// Whether the derived rule is unital, i.e. `h` solves the boundary
    /// equation.
    pub fn is_consistent(&self) -> bool {
        self.rule.is_unital()
    }

    /// `D_0 = ω_0^{1/2} h ω_0^{1/2}`.
    pub fn initial_density(&self) -> Result<CMatrix> {
        let w = herm_pow_matrix(self.boundary.omega0(), 0.5)?;
        Ok(&w * self.boundary.h() * &w)
    }

    pub fn resolve_path(&self, path: Path, n: usize) -> Result<Path> {
        match path {
            Path::Auto => {
                let sites = self.shape.ball_size(n);
                Ok(if self.is_diagonal() && diagonal_dim(sites, self.shape.d).is_ok() {
                    Path::Diagonal
                } else {
                    Path::Dense
                })
            }
            Path::Diagonal if !self.is_diagonal() => Err(Error::StrategyInapplicable(
                "diagonal path needs diagonal amplitude and boundary".into(),
            )),
            Path::Factorized => Err(Error::StrategyInapplicable(
                "the factorized path yields entropies only".into(),
            )),
            p => Ok(p),
        }
    }

    fn initial_state(&self, path: Path) -> Result<FiniteState> {
        let d0 = self.initial_density()?;
        let root = crate::tree::SiteSet::singleton(Vertex::root());
        let density = match path {
            Path::Diagonal => {
                let w = (0..self.shape.d).map(|i| d0[(i, i)].re).collect();
                LevelDensity::Diagonal(DiagonalState::new(root, self.shape.d, w)?)
            }
            _ => LevelDensity::Dense(Operator::new(root, self.shape.d, d0)?),
        };
        let raw_trace = density.trace();
        Ok(FiniteState {
            level: 0,
            density,
            raw_trace,
        })
    }

    /// Level densities `D_0, …, D_n` from the recursion
    /// `D_{m+1} = K_{[m,m+1]} D_m K*_{[m,m+1]}`.
    ///
    /// Raw traces are always recorded; densities are rescaled only when
    /// normalization is switched on.
    pub fn level_states(&self, n: usize, path: Path) -> Result<Vec<FiniteState>> {
        let path = self.resolve_path(path, n)?;
        if path == Path::Dense {
            dense_dim(self.shape.ball_size(n), self.shape.d)?;
        }
        let mut raw = self.initial_state(path)?;
        let mut out = Vec::with_capacity(n + 1);
        for m in 0..=n {
            if m > 0 {
                raw = advance_density(&raw, &self.rule)?;
            }
            out.push(self.finish(raw.clone()));
        }
        Ok(out)
    }

    pub fn level_state(&self, n: usize, path: Path) -> Result<FiniteState> {
        Ok(self.level_states(n, path)?.pop().expect("non-empty"))
    }

    fn finish(&self, state: FiniteState) -> FiniteState {
        if self.normalize {
            FiniteState {
                density: state.density.normalized(),
                ..state
            }
        } else {
            state
        }
    }

    /// Boundary functional density on `Λ_n`:
    /// `Tr_{W_{n+1}} 𝐊*𝐊` with `𝐊 = ω_0^{1/2} A_{[0,1]} ⋯ A_{[n,n+1]} h^{1/2}_{W_{n+1}}`.
    pub fn functional_density(&self, n: usize, path: Path) -> Result<FiniteState> {
        let path = self.resolve_path(path, n + 1)?;
        let outer = ball(n + 1, &self.shape);
        let inner = ball(n, &self.shape);
        let w = match path {
            Path::Diagonal => LevelDensity::Diagonal(self.diagonal_functional_weights(n)?),
            _ => LevelDensity::Dense(self.dense_functional_operator(n)?),
        };
        debug_assert_eq!(w.support(), &outer);
        let density = w.marginal(&inner)?;
        let raw_trace = density.trace();
        Ok(self.finish(FiniteState {
            level: n,
            density,
            raw_trace,
        }))
    }

    fn dense_functional_operator(&self, n: usize) -> Result<Operator> {
        let outer = ball(n + 1, &self.shape);
        let d = self.shape.d;
        dense_dim(outer.len(), d)?;
        let a_rule = TransitionRule::unchecked(self.shape, self.triple.clone())?;
        let root = Operator::local(Vertex::root(), herm_pow_matrix(self.boundary.omega0(), 0.5)?)?;
        let mut kb = root.extend_to(&outer)?;
        for m in 0..=n {
            kb = kb.mul(&level_amplitude(&a_rule, m)?.extend_to(&outer)?)?;
        }
        let h_half = herm_pow_matrix(self.boundary.h(), 0.5)?;
        let mut hb: Option<Operator> = None;
        for v in level_set(n + 1, &self.shape).iter() {
            let local = Operator::local(v.clone(), h_half.clone())?;
            hb = Some(match hb {
                None => local,
                Some(acc) => kron(&acc, &local)?,
            });
        }
        let kb = kb.mul(&hb.expect("non-empty level").extend_to(&outer)?)?;
        kb.adjoint().mul(&kb)
    }

    fn diagonal_functional_weights(&self, n: usize) -> Result<DiagonalState> {
        let d = self.shape.d;
        let table: Vec<f64> = (0..self.triple.nrows())
            .map(|i| self.triple[(i, i)].norm_sqr())
            .collect();
        let root = crate::tree::SiteSet::singleton(Vertex::root());
        let w0 = (0..d).map(|i| self.boundary.omega0()[(i, i)].re).collect();
        let mut st = DiagonalState::new(root, d, w0)?;
        for _ in 0..=n {
            st = diagonal_advance(&st, &table, &self.shape)?;
        }
        let h: Vec<f64> = (0..d).map(|i| self.boundary.h()[(i, i)].re).collect();
        let leaves = self.shape.level_size(n + 1);
        let weights = st
            .weights()
            .iter()
            .enumerate()
            .map(|(idx, &w)| {
                let mut rest = idx;
                let mut prod = w;
                for _ in 0..leaves {
                    prod *= h[rest % d];
                    rest /= d;
                }
                prod
            })
            .collect();
        DiagonalState::new(st.support().clone(), d, weights)
    }

    /// `φ^{(n)}(a) = Tr(𝒲_{n+1]} (a ⊗ 1))` for `a` inside `Λ_n`.
    pub fn finite_functional(&self, n: usize, a: &Operator, path: Path) -> Result<Complex64> {
        self.functional_density(n, path)?.density.expectation(a)
    }

    /// `E_{Λ_n}(a) = Tr_{W_{n+1}}(K* a K)` for `a` on `Λ_{n+1}`.
    pub fn conditional_expectation(&self, n: usize, a: &Operator) -> Result<Operator> {
        let outer = ball(n + 1, &self.shape);
        if !a.support().is_subset(&outer) {
            return Err(Error::NotInRegion(format!("{:?}", a.support().vertices())));
        }
        let k = level_amplitude(&self.rule, n)?.extend_to(&outer)?;
        let inner = k.adjoint().mul(&a.extend_to(&outer)?)?.mul(&k)?;
        partial_trace(&inner, &ball(n, &self.shape))
    }
}
