//! Induced child maps, π-matrices, peripheral spectra and correlation decay.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, herm_eig_matrix, max_abs, trace_out_tail, CMatrix, Operator, ZERO};
use crate::qms::{LevelDensity, Path, QmsModel, TransitionRule};
use crate::tolerances::{COMPATIBILITY_TOL, DENSITY_TOL, PERIPHERAL_TOL};
use crate::tree::{SiteSet, Vertex};

/// Orthogonal projections on one site summing to the identity, declared
/// central for the range algebra of a rule.
#[derive(Clone, Debug)]
pub struct RangeAlgebra {
    d: usize,
    projections: Vec<CMatrix>,
}

impl RangeAlgebra {
    pub fn new(projections: Vec<CMatrix>) -> Result<Self> {
        let d = projections
            .first()
            .map(|p| p.nrows())
            .ok_or_else(|| Error::InvalidParameter("no projections given".into()))?;
        let mut sum = CMatrix::zeros(d, d);
        for (i, p) in projections.iter().enumerate() {
            if p.nrows() != d || !p.is_square() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.nrows(),
                });
            }
            if max_abs(&(p * p - p)) > DENSITY_TOL || max_abs(&(p - p.adjoint())) > DENSITY_TOL {
                return Err(Error::InvalidParameter(format!("element {i} is not a projection")));
            }
            for q in &projections[..i] {
                if max_abs(&(p * q)) > DENSITY_TOL {
                    return Err(Error::InvalidParameter("projections are not orthogonal".into()));
                }
            }
            sum += p;
        }
        if max_abs(&(sum - CMatrix::identity(d, d))) > DENSITY_TOL {
            return Err(Error::InvalidParameter("projections do not sum to the identity".into()));
        }
        Ok(Self { d, projections })
    }

    /// The single projection `1`.
    pub fn trivial(d: usize) -> Self {
        Self {
            d,
            projections: vec![CMatrix::identity(d, d)],
        }
    }

    /// Minimal projections of the abelian algebra generated by the images
    /// of diagonal inputs under a diagonal rule: basis indices are grouped
    /// when every image takes the same value on them.
    pub fn detect_diagonal(rule: &TransitionRule) -> Result<Self> {
        let weights = rule.transition_weights().ok_or_else(|| {
            Error::StrategyInapplicable("range detection is implemented for diagonal rules only".into())
        })?;
        let d = rule.shape().d;
        let block = weights.len() / d;
        // image of the diagonal unit at (p, children) is |K|² e_pp
        let images: Vec<Vec<f64>> = weights
            .iter()
            .enumerate()
            .map(|(m, &w)| {
                let mut v = vec![0.0; d];
                v[m / block] = w;
                v
            })
            .collect();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..d {
            let same = |j: usize| images.iter().all(|v| (v[i] - v[j]).abs() <= DENSITY_TOL);
            match classes.iter_mut().find(|cls| same(cls[0])) {
                Some(cls) => cls.push(i),
                None => classes.push(vec![i]),
            }
        }
        let projections = classes
            .iter()
            .map(|cls| {
                let mut p = CMatrix::zeros(d, d);
                for &i in cls {
                    p[(i, i)] = c(1.0);
                }
                p
            })
            .collect();
        Self::new(projections)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.projections.iter().map(|p| p.trace().re.round() as usize).collect()
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }
}

fn check_child(rule: &TransitionRule, j: usize) -> Result<()> {
    let k = rule.shape().k;
    if j == 0 || j > k {
        return Err(Error::InvalidChildIndex(j, k));
    }
    if !rule.is_unital() {
        return Err(Error::NotUnital(rule.unitality_defect()));
    }
    Ok(())
}

/// `1 ⊗ … ⊗ b_{(j)} ⊗ … ⊗ 1` on a parent-children block, or with the
/// parent factor replaced by `parent`.
fn embed_child(rule: &TransitionRule, j: usize, parent: &CMatrix, b: &CMatrix) -> CMatrix {
    let (k, d) = (rule.shape().k, rule.shape().d);
    let mut m = parent.clone();
    for i in 1..=k {
        m = if i == j {
            m.kronecker(b)
        } else {
            m.kronecker(&CMatrix::identity(d, d))
        };
    }
    m
}

/// `P_j(b) = E(1 ⊗ b_{(j)} ⊗ 1)`.
pub fn apply_child_map(rule: &TransitionRule, j: usize, b: &CMatrix) -> Result<CMatrix> {
    check_child(rule, j)?;
    let d = rule.shape().d;
    Ok(rule.expectation(&embed_child(rule, j, &CMatrix::identity(d, d), b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapBasis {
    /// Columns are `vec(P(e_ab))` over the `d²` matrix units.
    MatrixUnits,
    /// Columns hold the coefficients of `P(p_i')` in the projections.
    Projections,
}

#[derive(Clone, Debug)]
pub struct InducedMap {
    pub j: usize,
    pub basis: MapBasis,
    pub matrix: CMatrix,
}

impl InducedMap {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `P_j` on the full single-site algebra in the matrix-unit basis; its
/// nonzero spectrum is that of the restriction to the range algebra.
pub fn induced_map(rule: &TransitionRule, j: usize) -> Result<InducedMap> {
    check_child(rule, j)?;
    let d = rule.shape().d;
    let mut m = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(a, b)] = c(1.0);
            let out = apply_child_map(rule, j, &e)?;
            for r in 0..d {
                for s in 0..d {
                    m[(r * d + s, a * d + b)] = out[(r, s)];
                }
            }
        }
    }
    Ok(InducedMap {
        j,
        basis: MapBasis::MatrixUnits,
        matrix: m,
    })
}

/// `π_{ii'} = Tr(p_i E(p_i ⊗ p_{i'} ⊗ 1)) / Tr(p_i)` with `p_{i'}` on child `j`.
#[derive(Clone, Debug, Serialize)]
pub struct PiMatrix {
    pub j: usize,
    pub entries: Vec<Vec<f64>>,
    /// Largest deviation from `E(p_i ⊗ p_{i'} ⊗ 1) = π_{ii'} p_i`.
    pub centrality_defect: f64,
}

impl PiMatrix {
    pub fn min_entry(&self) -> f64 {
        self.entries.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.min_entry() > 0.0
    }

    /// The map `P_j` in the projection basis.
    pub fn as_map(&self) -> InducedMap {
        let r = self.entries.len();
        InducedMap {
            j: self.j,
            basis: MapBasis::Projections,
            matrix: CMatrix::from_fn(r, r, |i, ip| c(self.entries[i][ip])),
        }
    }

    /// Left fixed vector `ν π = ν` normalized to sum one.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let r = self.entries.len();
        let mut a = DMatrix::from_fn(r, r, |i, ip| self.entries[ip][i] - if i == ip { 1.0 } else { 0.0 });
        for col in 0..r {
            a[(r - 1, col)] = 1.0;
        }
        let mut rhs = DVector::zeros(r);
        rhs[r - 1] = 1.0;
        a.lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::InvalidParameter("stationary vector is not unique".into()))
    }
}

pub fn pi_matrix(rule: &TransitionRule, j: usize, ra: &RangeAlgebra) -> Result<PiMatrix> {
    check_child(rule, j)?;
    if ra.d() != rule.shape().d {
        return Err(Error::DimensionMismatch {
            expected: rule.shape().d,
            got: ra.d(),
        });
    }
    let r = ra.len();
    let mut entries = vec![vec![0.0; r]; r];
    let mut defect = 0.0_f64;
    for (i, pi) in ra.projections().iter().enumerate() {
        for (ip, pip) in ra.projections().iter().enumerate() {
            let out = rule.expectation(&embed_child(rule, j, pi, pip));
            let val = (pi * &out).trace().re / pi.trace().re;
            defect = defect.max(max_abs(&(out - pi * c(val))));
            entries[i][ip] = val;
        }
    }
    if defect > COMPATIBILITY_TOL {
        return Err(Error::NotCentral(defect));
    }
    Ok(PiMatrix {
        j,
        entries,
        centrality_defect: defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PeripheralReport {
    /// All eigenvalues, sorted by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    pub peripheral: Vec<(f64, f64)>,
    pub spectral_radius: f64,
    /// Largest modulus below the peripheral band, zero if none.
    pub second_modulus: f64,
}

impl PeripheralReport {
    /// Exactly one peripheral eigenvalue and it equals 1.
    pub fn is_trivial(&self) -> bool {
        self.peripheral.len() == 1 && {
            let (re, im) = self.peripheral[0];
            (re - 1.0).abs() < PERIPHERAL_TOL && im.abs() < PERIPHERAL_TOL
        }
    }

    pub fn gap(&self) -> f64 {
        1.0 - self.second_modulus
    }
}

/// Eigenvalues from the complex Schur form; those with `|λ| ≥ 1 − tol` are
/// peripheral.
pub fn peripheral_spectrum(map: &InducedMap) -> PeripheralReport {
    let t = map.matrix.clone().schur().unpack().1;
    let mut eig: Vec<Complex64> = t.diagonal().iter().copied().collect();
    eig.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    let peripheral: Vec<Complex64> = eig
        .iter()
        .copied()
        .filter(|z| z.norm() >= 1.0 - PERIPHERAL_TOL)
        .collect();
    let second_modulus = eig
        .iter()
        .map(|z| z.norm())
        .find(|&m| m < 1.0 - PERIPHERAL_TOL)
        .unwrap_or(0.0);
    let pair = |z: &Complex64| (z.re, z.im);
    PeripheralReport {
        spectral_radius: eig.first().map(|z| z.norm()).unwrap_or(0.0),
        eigenvalues: eig.iter().map(pair).collect(),
        peripheral: peripheral.iter().map(pair).collect(),
        second_modulus,
    }
}

/// `‖P_j(1) − 1‖_max` and the most negative eigenvalue of `P_j(b)` over
/// the rank-one projections onto basis and two-term superposition vectors.
pub fn map_sanity(rule: &TransitionRule, j: usize) -> Result<(f64, f64)> {
    let d = rule.shape().d;
    let one = CMatrix::identity(d, d);
    let unital = max_abs(&(apply_child_map(rule, j, &one)? - &one));
    let mut worst = 0.0_f64;
    for a in 0..d {
        for b in a..d {
            let mut v = DVector::from_element(d, ZERO);
            v[a] = c(1.0);
            v[b] += c(1.0);
            let p = &v * v.adjoint();
            let min = herm_eig_matrix(&apply_child_map(rule, j, &p)?, DENSITY_TOL)?.min();
            worst = worst.min(min);
        }
    }
    Ok((unital, worst))
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub distance: usize,
    pub correlation: f64,
    /// `|c_1| λ^{g−1}` with `λ` the second eigenvalue modulus of `P_1`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayTable {
    pub second_modulus: f64,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].correlation < w[0].correlation)
    }

    /// Every row within `factor` of its spectral bound, either way.
    pub fn within_factor(&self, factor: f64) -> bool {
        self.rows.iter().all(|r| {
            if r.bound == 0.0 {
                r.correlation.abs() < 1e-12
            } else {
                let ratio = r.correlation / r.bound;
                ratio <= factor && ratio >= 1.0 / factor
            }
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "# second_modulus: {:.15e}", self.second_modulus)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["distance", "correlation", "bound"])?;
        for r in &self.rows {
            w.write_record([
                r.distance.to_string(),
                format!("{:.15e}", r.correlation),
                format!("{:.15e}", r.bound),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Second eigenvalue modulus of `P_1`, in the detected projection basis for
/// diagonal rules and the matrix-unit basis otherwise.
pub fn child_map_second_modulus(rule: &TransitionRule) -> Result<f64> {
    let map = match RangeAlgebra::detect_diagonal(rule) {
        Ok(ra) => pi_matrix(rule, 1, &ra)?.as_map(),
        Err(_) => induced_map(rule, 1)?,
    };
    Ok(peripheral_spectrum(&map).second_modulus)
}

/// `|φ(a α_g(b)) − φ(a) φ(b)|` for root observables `a`, `b` and shifts `g`
/// along the first ray, `|g| = 1..=g_max`.
pub fn correlation_decay(
    model: &QmsModel,
    a: &CMatrix,
    b: &CMatrix,
    g_max: usize,
    path: Path,
) -> Result<DecayTable> {
    let second_modulus = child_map_second_modulus(model.rule())?;
    let states = model.level_states(g_max, path)?;
    let root = Vertex::root();
    let a_op = Operator::local(root.clone(), a.clone())?;
    let mut rows: Vec<DecayRow> = Vec::with_capacity(g_max);
    for (g, state) in states.iter().enumerate().skip(1) {
        let far = Vertex::ray(1, g);
        let dens: LevelDensity = state.density.normalized();
        let pair = dens.marginal(&SiteSet::new(vec![root.clone(), far.clone()]))?;
        let b_far = Operator::local(far, b.clone())?;
        let joint = pair.expectation(&a_op.mul(&b_far)?)?;
        let fa = pair.expectation(&a_op)?;
        let fb = pair.expectation(&b_far)?;
        let correlation = (joint - fa * fb).norm();
        let bound = match rows.first() {
            None => correlation,
            Some(first) => first.correlation * second_modulus.powi(g as i32 - 1),
        };
        rows.push(DecayRow {
            distance: g,
            correlation,
            bound,
        });
    }
    Ok(DecayTable {
        second_modulus,
        rows,
    })
}

/// Rule whose children always carry the flipped parent spin: a
/// permutation-like map with peripheral spectrum `{1, −1}`.
pub fn spin_flip_rule(k: usize) -> Result<TransitionRule> {
    let shape = crate::tree::TreeShape::new(k, 2)?;
    let block = 1usize << k;
    let mut m = CMatrix::zeros(2 * block, 2 * block);
    for p in 0..2 {
        let kids = if p == 0 { block - 1 } else { 0 };
        m[(p * block + kids, p * block + kids)] = c(1.0);
    }
    TransitionRule::new(shape, m)
}

/// Marginal of the stationary vector mapped back to a single-site density.
pub fn stationary_density(pi: &PiMatrix, ra: &RangeAlgebra) -> Result<CMatrix> {
    let nu = pi.stationary()?;
    let d = ra.d();
    let mut out = CMatrix::zeros(d, d);
    for (w, p) in nu.iter().zip(ra.projections()) {
        out += p * c(w / p.trace().re);
    }
    Ok(out)
}

/// Single-site marginal at `v` of the level state containing it.
pub fn site_marginal(model: &QmsModel, v: &Vertex, path: Path) -> Result<CMatrix> {
    let st = model.level_state(v.level(), path)?;
    let m = st.density.normalized().marginal(&SiteSet::singleton(v.clone()))?;
    Ok(m.to_dense()?.into_matrix())
}

/// Reduced root matrix of `E(b ⊗ 1)` for a parent observable `b`.
pub fn parent_expectation(rule: &TransitionRule, b: &CMatrix) -> CMatrix {
    let s = rule.shape();
    let dk = s.d.pow(s.k as u32);
    let full = b.kronecker(&CMatrix::identity(dk, dk));
    trace_out_tail(&(rule.amplitude().adjoint() * full * rule.amplitude()), s.d, 1, s.k)
}
