use num_complex::Complex64;
use proptest::prelude::*;
use qms_core::entropy::{entropies_by_path, level_entropy};
use qms_core::ising::{self, IsingParams, Sign};
use qms_core::linalg::testing::{random_density, random_hermitian, random_matrix, random_unitary, rng};
use qms_core::linalg::{max_abs, partial_trace, von_neumann_entropy, CMatrix, DensityMatrix, Operator};
use qms_core::mixing::{map_sanity, pi_matrix, site_marginal, stationary_density, RangeAlgebra};
use qms_core::qms::{check_compatibility, translation_invariance_defect, Path};
use qms_core::tree::{ball, SiteSet, Vertex};

fn three_sites() -> SiteSet {
    SiteSet::new(vec![Vertex::root(), Vertex::new(vec![1]), Vertex::new(vec![2])])
}

fn params() -> impl Strategy<Value = IsingParams> {
    (0.05f64..1.0, 0.05f64..1.0).prop_map(|(b, j)| IsingParams::alpha(b, j).unwrap())
}

fn density(sites: SiteSet, m: CMatrix) -> DensityMatrix {
    DensityMatrix::new(Operator::new(sites, 2, m).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_trace_is_dual_to_embedding(seed in any::<u64>(), keep in 1usize..7) {
        let sites = three_sites();
        let kept = SiteSet::new(
            sites.iter().enumerate().filter(|(i, _)| keep >> i & 1 == 1).map(|(_, v)| v.clone()).collect(),
        );
        let mut r = rng(seed);
        let a = Operator::new(sites.clone(), 2, random_matrix(&mut r, 8)).unwrap();
        let b = Operator::new(kept.clone(), 2, random_matrix(&mut r, 1 << kept.len())).unwrap();
        let lhs = partial_trace(&a, &kept).unwrap().trace_product(&b).unwrap();
        let rhs = a.trace_product(&b.extend_to(&sites).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn entropy_is_unitarily_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sites = SiteSet::new(vec![Vertex::root(), Vertex::new(vec![1])]);
        let rho = random_density(&mut r, 4);
        let u = random_unitary(&mut r, 4);
        let s1 = von_neumann_entropy(&density(sites.clone(), rho.clone())).unwrap();
        let s2 = von_neumann_entropy(&density(sites, &u * rho * u.adjoint())).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-10);
    }

    #[test]
    fn entropy_is_subadditive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sites = SiteSet::new(vec![Vertex::root(), Vertex::new(vec![1])]);
        let rho = density(sites.clone(), random_density(&mut r, 4));
        let part = |v: Vertex| {
            let m = partial_trace(rho.operator(), &SiteSet::singleton(v.clone())).unwrap();
            von_neumann_entropy(&DensityMatrix::new(m).unwrap()).unwrap()
        };
        let joint = von_neumann_entropy(&rho).unwrap();
        prop_assert!(joint <= part(Vertex::root()) + part(Vertex::new(vec![1])) + 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn module_property_of_conditional_expectation(p in params(), seed in any::<u64>()) {
        let model = ising::ising_model(&p).unwrap();
        let shape = model.shape();
        let mut r = rng(seed);
        let a = Operator::new(ball(2, &shape), 2, random_hermitian(&mut r, 128)).unwrap();
        let c = Operator::new(ball(0, &shape), 2, random_matrix(&mut r, 2)).unwrap();
        let ca = c.extend_to(a.support()).unwrap().mul(&a).unwrap();
        let lhs = model.conditional_expectation(1, &ca).unwrap();
        let e = model.conditional_expectation(1, &a).unwrap();
        let rhs = c.extend_to(e.support()).unwrap().mul(&e).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn symmetric_states_are_compatible_and_invariant(p in params()) {
        let model = ising::ising_model(&p).unwrap();
        prop_assert!(model.rule().unitality_defect() < 1e-10);
        let rep = check_compatibility(&model, 2, Path::Diagonal, 42);
        prop_assert!(rep.passed_default(), "{:?}", rep);
        for n in 0..=2 {
            prop_assert!(translation_invariance_defect(&model, n, Path::Diagonal).unwrap() < 1e-9);
        }
    }

    #[test]
    fn entropies_respect_bounds_and_paths_agree(p in params()) {
        let model = ising::ising_model(&p).unwrap();
        for n in 0..=2 {
            let (s, _) = level_entropy(&model, n, Path::Auto).unwrap();
            prop_assert!(s >= -1e-12);
            prop_assert!(s <= model.shape().ball_size(n) as f64 * std::f64::consts::LN_2 + 1e-12);
            let all = entropies_by_path(&model, n);
            prop_assert!(all.len() >= 2);
            for (_, v) in &all {
                prop_assert!((v - s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_sign_and_normalization(p in params()) {
        let cf = ising::ising_closed_form(&p);
        prop_assert_eq!(cf.chosen, Sign::Minus);
        prop_assert!(cf.plus < 0.0);
        prop_assert!((ising::normalization_sum(&p) - 8.0).abs() < 1e-12);
        let f = ising::factorized_entropy(&p, 2);
        prop_assert!((f.normalized - level_entropy(&ising::ising_model(&p).unwrap(), 2, Path::Dense).unwrap().0).abs() < 1e-8);
    }

    #[test]
    fn classical_weights_are_flip_symmetric(p in params()) {
        let t = ising::classical_weights(&p, 2).unwrap();
        let w = t.state.weights();
        let last = w.len() - 1;
        for i in 0..w.len() {
            prop_assert!((w[i] - w[last - i]).abs() < 1e-15);
        }
        let level1 = ising::classical_weights(&p, 1).unwrap();
        let back = t.state.marginal(&ball(1, &ising::shape())).unwrap();
        prop_assert!(back.max_abs_diff(&level1.state).unwrap() < 1e-12);
    }

    #[test]
    fn child_maps_are_unital_positive_and_stationary(p in params()) {
        let model = ising::ising_model(&p).unwrap();
        let rule = model.rule();
        let ra = RangeAlgebra::detect_diagonal(rule).unwrap();
        for j in 1..=2 {
            let (unital, neg) = map_sanity(rule, j).unwrap();
            prop_assert!(unital < 1e-10 && neg > -1e-10);
            let pi = pi_matrix(rule, j, &ra).unwrap();
            let nu = stationary_density(&pi, &ra).unwrap();
            let marg = site_marginal(&model, &Vertex::new(vec![j]), Path::Diagonal).unwrap();
            prop_assert!(max_abs(&(nu - marg)) < 1e-9);
            let fixed = pi.as_map().matrix * CMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
            prop_assert!(fixed.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        }
    }
}
