//! Dense complex linear algebra on site-labelled tensor products.

mod density;
mod operator;
mod spectral;

pub use density::{
    diag_fast_entropy, operator_entropy, raw_diag_entropy, von_neumann_entropy, DensityMatrix,
};
pub use operator::{
    c, hermitian_defect, is_diagonal, kron, max_abs, partial_trace, trace_of_product,
    trace_out_head, trace_out_tail, CMatrix, Operator, ONE, ZERO,
};
pub(crate) use operator::dense_dim;
pub use spectral::{
    abs_matrix, herm_eig, herm_eig_matrix, herm_exp, herm_exp_matrix, herm_log, herm_log_matrix,
    herm_pow_matrix, Spectrum,
};

/// Pauli matrices in the `σ_z` eigenbasis, spin up first.
pub mod pauli {
    use super::{c, CMatrix, ZERO};
    use num_complex::Complex64;

    pub fn id() -> CMatrix {
        CMatrix::identity(2, 2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, c(1.0), c(1.0), ZERO])
    }

    pub fn y() -> CMatrix {
        let i = Complex64::new(0.0, 1.0);
        CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1.0), ZERO, ZERO, c(-1.0)])
    }
}

/// Seeded random matrices for tests and randomized checks.
pub mod testing {
    use super::{c, CMatrix};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        let a = random_matrix(rng, n);
        (&a + a.adjoint()) * c(0.5)
    }

    pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        let a = random_matrix(rng, n);
        let p = &a * a.adjoint();
        let t = p.trace();
        p / t
    }

    /// Unitary from the QR factor of a random complex matrix.
    pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        random_matrix(rng, n).qr().q()
    }
}
