use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::DENSE_DIM_CAP;
use crate::tree::{SiteSet, Vertex};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense operator on the tensor product of the sites in `support`.
///
/// Basis indices are mixed-radix configurations with the first site of the
/// canonical order as the most significant digit, matching `a ⊗ b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    support: SiteSet,
    d: usize,
    matrix: CMatrix,
}

pub(crate) fn dense_dim(sites: usize, d: usize) -> Result<usize> {
    let too_large = || Error::RegionTooLarge {
        sites,
        d,
        path: "dense",
    };
    let dim = d.checked_pow(sites as u32).ok_or_else(too_large)?;
    if dim > DENSE_DIM_CAP {
        return Err(too_large());
    }
    Ok(dim)
}

impl Operator {
    pub fn new(support: SiteSet, d: usize, matrix: CMatrix) -> Result<Self> {
        let dim = dense_dim(support.len(), d)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { support, d, matrix })
    }

    pub fn identity(support: SiteSet, d: usize) -> Result<Self> {
        let dim = dense_dim(support.len(), d)?;
        Ok(Self {
            support,
            d,
            matrix: CMatrix::identity(dim, dim),
        })
    }

    /// A single-site operator.
    pub fn local(site: Vertex, matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(SiteSet::singleton(site), d, matrix)
    }

    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Operator {
        Self {
            support: self.support.clone(),
            d: self.d,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Operator {
        Self {
            support: self.support.clone(),
            d: self.d,
            matrix: &self.matrix * s,
        }
    }

    pub fn map_matrix(&self, f: impl FnOnce(&CMatrix) -> CMatrix) -> Result<Operator> {
        Operator::new(self.support.clone(), self.d, f(&self.matrix))
    }

    /// Embeds `self ⊗ 1` into the larger region `target ⊇ support`.
    pub fn extend_to(&self, target: &SiteSet) -> Result<Operator> {
        if !self.support.is_subset(target) {
            return Err(Error::KeepNotSubset);
        }
        if &self.support == target {
            return Ok(self.clone());
        }
        let rest = Operator::identity(target.difference(&self.support), self.d)?;
        kron(self, &rest)
    }

    /// Product of two operators, each extended to the union of supports.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        Operator::new(a.support.clone(), a.d, &a.matrix * &b.matrix)
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        Operator::new(a.support.clone(), a.d, &a.matrix + &b.matrix)
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        Operator::new(a.support.clone(), a.d, &a.matrix - &b.matrix)
    }

    fn aligned(&self, other: &Operator) -> Result<(Operator, Operator)> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let union = self.support.union(&other.support);
        Ok((self.extend_to(&union)?, other.extend_to(&union)?))
    }

    /// `‖[a, b]‖_max`.
    pub fn commutator_norm(&self, other: &Operator) -> Result<f64> {
        let (a, b) = self.aligned(other)?;
        Ok(max_abs(&(&a.matrix * &b.matrix - &b.matrix * &a.matrix)))
    }

    /// `Tr(self · other)` with both extended to a common support.
    pub fn trace_product(&self, other: &Operator) -> Result<Complex64> {
        let (a, b) = self.aligned(other)?;
        Ok(trace_of_product(&a.matrix, &b.matrix))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        let (a, b) = self.aligned(other)?;
        Ok(max_abs(&(&a.matrix - &b.matrix)))
    }

    /// Relabels the support through the shift `α_g`. Canonical order is
    /// preserved by shifts, so the matrix is unchanged.
    pub fn shifted(&self, g: &Vertex) -> Operator {
        Self {
            support: self.support.shifted(g),
            d: self.d,
            matrix: self.matrix.clone(),
        }
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        is_diagonal(&self.matrix, tol)
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn is_diagonal(m: &CMatrix, tol: f64) -> bool {
    m.iter()
        .enumerate()
        .all(|(idx, z)| idx % m.nrows() == idx / m.nrows() || z.norm() <= tol)
}

pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn strides(n: usize, d: usize) -> Vec<usize> {
    let mut s = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * d;
    }
    s
}

/// For every configuration of the sites at `positions` (enumerated
/// mixed-radix, first position most significant) the matching offset in the
/// full `n`-site index.
fn offsets(positions: &[usize], n: usize, d: usize) -> Vec<usize> {
    let full = strides(n, d);
    let mut out = vec![0usize];
    for &p in positions {
        let stride = full[p];
        out = out
            .iter()
            .flat_map(|&o| (0..d).map(move |digit| o + digit * stride))
            .collect();
    }
    out
}

/// Reorders tensor factors given in `order` into the canonical order of
/// `target` (same vertex set).
fn reorder(matrix: &CMatrix, d: usize, order: &[Vertex], target: &SiteSet) -> CMatrix {
    let n = order.len();
    // canonical position -> position in `order`
    let positions: Vec<usize> = target
        .iter()
        .map(|v| order.iter().position(|w| w == v).expect("same vertex set"))
        .collect();
    if positions.iter().enumerate().all(|(i, &p)| i == p) {
        return matrix.clone();
    }
    let map = offsets(&positions, n, d);
    let dim = map.len();
    CMatrix::from_fn(dim, dim, |i, j| matrix[(map[i], map[j])])
}

/// Tensor product with factors placed in canonical site order.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch {
            expected: a.d,
            got: b.d,
        });
    }
    if !a.support.is_disjoint(&b.support) {
        return Err(Error::OverlappingSupport);
    }
    let support = a.support.union(&b.support);
    dense_dim(support.len(), a.d)?;
    let raw = a.matrix.kronecker(&b.matrix);
    let order: Vec<Vertex> = a.support.iter().chain(b.support.iter()).cloned().collect();
    let matrix = reorder(&raw, a.d, &order, &support);
    Ok(Operator {
        support,
        d: a.d,
        matrix,
    })
}

/// `T^{support}_{keep}`: traces out `support ∖ keep`.
pub fn partial_trace(a: &Operator, keep: &SiteSet) -> Result<Operator> {
    if !keep.is_subset(&a.support) {
        return Err(Error::KeepNotSubset);
    }
    if keep == &a.support {
        return Ok(a.clone());
    }
    let n = a.support.len();
    let kept: Vec<usize> = keep.iter().map(|v| a.support.position(v).unwrap()).collect();
    let traced: Vec<usize> = (0..n).filter(|p| !kept.contains(p)).collect();
    let ko = offsets(&kept, n, a.d);
    let to = offsets(&traced, n, a.d);
    let dim = ko.len();
    let m = &a.matrix;
    let matrix = CMatrix::from_fn(dim, dim, |i, j| {
        let (oi, oj) = (ko[i], ko[j]);
        to.iter().map(|&t| m[(oi + t, oj + t)]).sum()
    });
    Ok(Operator {
        support: keep.clone(),
        d: a.d,
        matrix,
    })
}

/// Partial trace of a raw matrix over the trailing `traced` factors.
pub fn trace_out_tail(m: &CMatrix, d: usize, kept: usize, traced: usize) -> CMatrix {
    let tail = d.pow(traced as u32);
    let dim = d.pow(kept as u32);
    CMatrix::from_fn(dim, dim, |i, j| {
        (0..tail).map(|t| m[(i * tail + t, j * tail + t)]).sum()
    })
}

/// Partial trace of a raw matrix over the leading `traced` factors.
pub fn trace_out_head(m: &CMatrix, d: usize, traced: usize, kept: usize) -> CMatrix {
    let head = d.pow(traced as u32);
    let dim = d.pow(kept as u32);
    CMatrix::from_fn(dim, dim, |i, j| {
        (0..head).map(|t| m[(t * dim + i, t * dim + j)]).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use crate::linalg::testing::{random_matrix, rng};

    fn site(c: &[usize]) -> Vertex {
        Vertex::new(c.to_vec())
    }

    #[test]
    fn kron_of_sigma_z() {
        let a = Operator::local(site(&[1]), pauli::z()).unwrap();
        let b = Operator::local(site(&[2]), pauli::z()).unwrap();
        let zz = kron(&a, &b).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0),
            c(-1.0),
            c(-1.0),
            c(1.0),
        ]));
        assert_eq!(zz.matrix(), &expected);
    }

    #[test]
    fn kron_with_identity_scales_trace() {
        let mut r = rng(1);
        let a = Operator::local(site(&[1]), random_matrix(&mut r, 2)).unwrap();
        let id = Operator::identity(SiteSet::singleton(site(&[2])), 2).unwrap();
        let t = kron(&a, &id).unwrap().trace();
        assert!((t - a.trace() * 2.0).norm() < 1e-14);
    }

    #[test]
    fn sigma_x_pair_squares_to_identity() {
        let a = Operator::local(site(&[1]), pauli::x()).unwrap();
        let b = Operator::local(site(&[2]), pauli::x()).unwrap();
        let xx = kron(&a, &b).unwrap();
        let sq = xx.mul(&xx).unwrap();
        assert!(max_abs(&(sq.matrix() - CMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn kron_reorders_to_canonical() {
        let mut r = rng(2);
        let ma = random_matrix(&mut r, 2);
        let mb = random_matrix(&mut r, 2);
        let a = Operator::local(site(&[2]), ma.clone()).unwrap();
        let b = Operator::local(site(&[1]), mb.clone()).unwrap();
        // support order is (1),(2): the product must be mb ⊗ ma
        let ab = kron(&a, &b).unwrap();
        assert!(max_abs(&(ab.matrix() - mb.kronecker(&ma))) < 1e-15);
    }

    #[test]
    fn kron_rejects_overlap() {
        let a = Operator::local(site(&[1]), pauli::x()).unwrap();
        assert_eq!(kron(&a, &a), Err(Error::OverlappingSupport));
    }

    #[test]
    fn partial_trace_of_product() {
        let mut r = rng(3);
        let ma = random_matrix(&mut r, 2);
        let mb = random_matrix(&mut r, 2);
        let a = Operator::local(Vertex::root(), ma.clone()).unwrap();
        let b = Operator::local(site(&[1]), mb.clone()).unwrap();
        let ab = kron(&a, &b).unwrap();
        let pa = partial_trace(&ab, a.support()).unwrap();
        assert!(max_abs(&(pa.matrix() - &ma * mb.trace())) < 1e-13);
        let pb = partial_trace(&ab, b.support()).unwrap();
        assert!(max_abs(&(pb.matrix() - &mb * ma.trace())) < 1e-13);
    }

    #[test]
    fn partial_trace_of_identity() {
        let s = SiteSet::new(vec![site(&[1]), site(&[2])]);
        let id = Operator::identity(s, 2).unwrap();
        let p = partial_trace(&id, &SiteSet::singleton(site(&[2]))).unwrap();
        assert!(max_abs(&(p.matrix() - CMatrix::identity(2, 2) * c(2.0))) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_foreign_sites() {
        let a = Operator::local(site(&[1]), pauli::x()).unwrap();
        assert_eq!(
            partial_trace(&a, &SiteSet::singleton(site(&[2]))),
            Err(Error::KeepNotSubset)
        );
    }

    #[test]
    fn tail_and_head_traces_match_general_partial_trace() {
        let mut r = rng(4);
        let s = SiteSet::new(vec![Vertex::root(), site(&[1]), site(&[2])]);
        let a = Operator::new(s.clone(), 2, random_matrix(&mut r, 8)).unwrap();
        let head = partial_trace(&a, &SiteSet::singleton(Vertex::root())).unwrap();
        assert!(max_abs(&(head.matrix() - trace_out_tail(a.matrix(), 2, 1, 2))) < 1e-13);
        let tail = partial_trace(&a, &s.difference(&SiteSet::singleton(Vertex::root()))).unwrap();
        assert!(max_abs(&(tail.matrix() - trace_out_head(a.matrix(), 2, 1, 2))) < 1e-13);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let sites: Vec<Vertex> = (0..15).map(|i| Vertex::ray(1, i)).collect();
        assert!(matches!(
            Operator::identity(SiteSet::new(sites), 2),
            Err(Error::RegionTooLarge { .. })
        ));
    }
}
