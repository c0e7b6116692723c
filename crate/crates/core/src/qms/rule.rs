use crate::error::{Error, Result};
use crate::linalg::{c, is_diagonal, kron, max_abs, trace_out_tail, CMatrix, Operator};
use crate::tolerances::UNITALITY_TOL;
use crate::tree::{level_set, TreeShape, Vertex};

/// Conditional density amplitude `K` on a parent and its `k` children.
///
/// The localized transition expectation is `E_x(a) = Tr_{S(x)}(K* a K)`;
/// it is completely positive by construction and identity preserving when
/// `Tr_{S(x)}(K* K) = 1`.
#[derive(Clone, Debug)]
pub struct TransitionRule {
    shape: TreeShape,
    amplitude: CMatrix,
    unitality_defect: f64,
}

fn block_dim(shape: &TreeShape) -> usize {
    shape.d.pow(shape.k as u32 + 1)
}

impl TransitionRule {
    /// Validates the block size and unitality.
    pub fn new(shape: TreeShape, amplitude: CMatrix) -> Result<Self> {
        let rule = Self::unchecked(shape, amplitude)?;
        if rule.unitality_defect > UNITALITY_TOL {
            return Err(Error::NotUnital(rule.unitality_defect));
        }
        Ok(rule)
    }

    /// Keeps non-unital amplitudes, e.g. those derived from a boundary
    /// family that does not solve the compatibility equation.
    pub fn unchecked(shape: TreeShape, amplitude: CMatrix) -> Result<Self> {
        let dim = block_dim(&shape);
        if amplitude.nrows() != dim || amplitude.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitude.nrows(),
            });
        }
        let e1 = trace_out_tail(&(amplitude.adjoint() * &amplitude), shape.d, 1, shape.k);
        let unitality_defect = max_abs(&(e1 - CMatrix::identity(shape.d, shape.d)));
        Ok(Self {
            shape,
            amplitude,
            unitality_defect,
        })
    }

    /// `K = d^{-k/2} 1`: every step appends maximally mixed children.
    pub fn trace_state(shape: TreeShape) -> Self {
        let dim = block_dim(&shape);
        let s = (shape.d as f64).powf(-(shape.k as f64) / 2.0);
        Self::unchecked(shape, CMatrix::identity(dim, dim) * c(s)).expect("square by construction")
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn amplitude(&self) -> &CMatrix {
        &self.amplitude
    }

    pub fn unitality_defect(&self) -> f64 {
        self.unitality_defect
    }

    pub fn is_unital(&self) -> bool {
        self.unitality_defect <= UNITALITY_TOL
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.amplitude, 0.0)
    }

    /// `|K|²` on the diagonal for diagonal rules: the classical transition
    /// weights, indexed parent-major.
    pub fn transition_weights(&self) -> Option<Vec<f64>> {
        self.is_diagonal().then(|| {
            (0..self.amplitude.nrows())
                .map(|i| self.amplitude[(i, i)].norm_sqr())
                .collect()
        })
    }

    /// `E(a) = Tr_children(K* a K)` for `a` on one parent-children block.
    pub fn expectation(&self, a: &CMatrix) -> CMatrix {
        let m = self.amplitude.adjoint() * a * &self.amplitude;
        trace_out_tail(&m, self.shape.d, 1, self.shape.k)
    }

    /// `K_{{x} ∪ S(x)}` as a site-labelled operator.
    pub fn block_operator(&self, x: &Vertex) -> Operator {
        Operator::new(self.shape.block(x), self.shape.d, self.amplitude.clone())
            .expect("block fits the dense cap")
    }
}

/// `K_{[n,n+1]} = ⊗_{x ∈ W_n} K_{{x} ∪ S(x)}` on `W_n ∪ W_{n+1}`.
pub fn level_amplitude(rule: &TransitionRule, n: usize) -> Result<Operator> {
    let shape = rule.shape();
    let mut acc: Option<Operator> = None;
    for x in level_set(n, &shape).iter() {
        let block = rule.block_operator(x);
        acc = Some(match acc {
            None => block,
            Some(prev) => kron(&prev, &block)?,
        });
    }
    Ok(acc.expect("level sets are non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::{random_matrix, rng};
    use crate::tree::{slab, SiteSet};

    fn shape() -> TreeShape {
        TreeShape::new(2, 2).unwrap()
    }

    #[test]
    fn trace_state_rule_is_unital() {
        let r = TransitionRule::trace_state(shape());
        assert!(r.unitality_defect() < 1e-15);
        let e = r.expectation(&CMatrix::identity(8, 8));
        assert!(max_abs(&(e - CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn rejects_non_unital() {
        let mut r = rng(21);
        let k = random_matrix(&mut r, 8);
        assert!(matches!(TransitionRule::new(shape(), k), Err(Error::NotUnital(_))));
        assert!(TransitionRule::new(shape(), CMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn level_amplitude_supports_and_dims() {
        let mut r = rng(22);
        let k = random_matrix(&mut r, 8);
        let rule = TransitionRule::unchecked(shape(), k.clone()).unwrap();
        let k0 = level_amplitude(&rule, 0).unwrap();
        assert_eq!(k0.support(), &slab(0, 1, &shape()));
        assert_eq!(k0.dim(), 8);
        assert_eq!(k0.matrix(), &k);

        let k1 = level_amplitude(&rule, 1).unwrap();
        assert_eq!(k1.support(), &slab(1, 2, &shape()));
        assert_eq!(k1.dim(), 64);
        // canonical order (1),(2),(1,1),(1,2),(2,1),(2,2) vs block order
        // (1),(1,1),(1,2),(2),(2,1),(2,2)
        let b1 = rule.block_operator(&Vertex::new(vec![1]));
        let b2 = rule.block_operator(&Vertex::new(vec![2]));
        let expected = kron(&b1, &b2).unwrap();
        assert_eq!(k1.matrix(), expected.matrix());
        let raw = k.kronecker(&k);
        assert!(max_abs(&(k1.matrix() - &raw)) > 1e-3, "factors must be permuted");
    }

    #[test]
    fn identity_rule_gives_identity_level_amplitude() {
        let rule = TransitionRule::unchecked(shape(), CMatrix::identity(8, 8)).unwrap();
        for n in 0..2 {
            let kn = level_amplitude(&rule, n).unwrap();
            assert_eq!(kn.matrix(), &CMatrix::identity(kn.dim(), kn.dim()));
        }
    }

    #[test]
    fn level_amplitude_respects_cap() {
        let rule = TransitionRule::trace_state(shape());
        assert!(matches!(level_amplitude(&rule, 3), Err(Error::RegionTooLarge { .. })));
        let _ = SiteSet::default();
    }
}
