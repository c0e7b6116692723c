//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.
//!
//! Reference values come from small independent oracles written here:
//! explicit index-loop partial traces and brute-force classical Gibbs
//! measures on the binary tree.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use qms_core::entropy::{
    amplitude_commutator, entropies_by_path, identity_terms, increment_via_amplitude, level_entropy, mean_entropy,
    Strategy,
};
use qms_core::ising::{self, IsingParams};
use qms_core::linalg::testing::{random_matrix, rng};
use qms_core::linalg::{max_abs, partial_trace, pauli, CMatrix, Operator};
use qms_core::mixing::{
    correlation_decay, induced_map, peripheral_spectrum, pi_matrix, spin_flip_rule, RangeAlgebra,
};
use qms_core::qms::{advance_density, FiniteState, LevelDensity, Path, QmsModel};
use qms_core::tree::{ball, SiteSet, TreeShape, Vertex};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

// ---------- oracles ----------

/// `Tr` over the sites whose flag is false, for a `2^3`-square matrix on
/// three qubits ordered A, B, C (A most significant).
fn oracle_partial_trace(a: &CMatrix, keep: [bool; 3]) -> CMatrix {
    let kept: Vec<usize> = (0..3).filter(|&s| keep[s]).collect();
    let dim = 1 << kept.len();
    let mut out = CMatrix::zeros(dim, dim);
    let bit = |idx: usize, s: usize| (idx >> (2 - s)) & 1;
    for i in 0..8 {
        for j in 0..8 {
            let traced_agree = (0..3).filter(|&s| !keep[s]).all(|s| bit(i, s) == bit(j, s));
            if !traced_agree {
                continue;
            }
            let r = kept.iter().fold(0, |acc, &s| (acc << 1) | bit(i, s));
            let c = kept.iter().fold(0, |acc, &s| (acc << 1) | bit(j, s));
            out[(r, c)] += a[(i, j)];
        }
    }
    out
}

/// `x ⊗ 1` on the full three-site space, placing `x` on the flagged sites.
fn oracle_embed(x: &CMatrix, on: [bool; 3]) -> CMatrix {
    let kept: Vec<usize> = (0..3).filter(|&s| on[s]).collect();
    let bit = |idx: usize, s: usize| (idx >> (2 - s)) & 1;
    CMatrix::from_fn(8, 8, |i, j| {
        if (0..3).filter(|&s| !on[s]).any(|s| bit(i, s) != bit(j, s)) {
            return Complex64::new(0.0, 0.0);
        }
        let r = kept.iter().fold(0, |acc, &s| (acc << 1) | bit(i, s));
        let c = kept.iter().fold(0, |acc, &s| (acc << 1) | bit(j, s));
        x[(r, c)]
    })
}

/// Classical Gibbs weights on the ball of radius `n` of the binary tree,
/// `∝ Π_x exp(β(σ_x σ_{x1} + σ_x σ_{x2} + J σ_{x1} σ_{x2}))`. Sites are in
/// breadth-first order, site 0 the most significant bit, bit 0 = spin up.
fn oracle_gibbs(beta: f64, j: f64, n: usize) -> Vec<f64> {
    let sites = (1usize << (n + 1)) - 1;
    let parents = (1usize << n) - 1;
    let spin = |cfg: usize, s: usize| if (cfg >> (sites - 1 - s)) & 1 == 0 { 1.0 } else { -1.0 };
    let mut w: Vec<f64> = (0..1usize << sites)
        .map(|cfg| {
            let mut e = 0.0;
            for x in 0..parents {
                let (sx, s1, s2) = (spin(cfg, x), spin(cfg, 2 * x + 1), spin(cfg, 2 * x + 2));
                e += sx * s1 + sx * s2 + j * s1 * s2;
            }
            (beta * e).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Shannon entropy of the marginal on the listed site positions.
fn oracle_marginal_entropy(w: &[f64], sites: usize, keep: &[usize]) -> f64 {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (cfg, &p) in w.iter().enumerate() {
        let key = keep.iter().fold(0, |acc, &s| (acc << 1) | ((cfg >> (sites - 1 - s)) & 1));
        *m.entry(key).or_default() += p;
    }
    shannon(&m.into_values().collect::<Vec<_>>())
}

/// Conditional entropy of the two children given the parent for one
/// symmetric triple; the mean entropy is half of it.
fn oracle_child_entropy(beta: f64, j: f64) -> f64 {
    let w = oracle_gibbs(beta, j, 1);
    shannon(&w) - oracle_marginal_entropy(&w, 3, &[0])
}

fn diagonal_of(d: &LevelDensity) -> Vec<f64> {
    match d {
        LevelDensity::Diagonal(st) => st.weights().to_vec(),
        LevelDensity::Dense(op) => op.matrix().diagonal().iter().map(|z| z.re).collect(),
    }
}

fn alpha_model() -> QmsModel {
    ising::ising_model(&IsingParams::alpha(0.1, 0.5).unwrap()).unwrap()
}

// ---------- criteria ----------

fn c1_partial_trace() -> Verdict {
    let start = Instant::now();
    let sites = SiteSet::new(vec![Vertex::root(), Vertex::ray(1, 1), Vertex::new(vec![2])]);
    let [a_site, b_site, c_site] = [0, 1, 2].map(|i| sites.vertices()[i].clone());
    let sub = |v: &[&Vertex]| SiteSet::new(v.iter().map(|&x| x.clone()).collect());
    let (ab, bc, b_only) = (sub(&[&a_site, &b_site]), sub(&[&b_site, &c_site]), sub(&[&b_site]));
    let mut r = rng(2024);
    let (mut worst_oracle, mut worst_t1, mut worst_t3, mut literal_c) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let m = random_matrix(&mut r, 8);
        let a = Operator::new(sites.clone(), 2, m.clone()).unwrap();
        let t_ab = partial_trace(&a, &ab).unwrap();
        let t_bc = partial_trace(&a, &bc).unwrap();
        worst_oracle = worst_oracle
            .max(max_abs(&(t_ab.matrix() - oracle_partial_trace(&m, [true, true, false]))))
            .max(max_abs(&(t_bc.matrix() - oracle_partial_trace(&m, [false, true, true]))));

        // restriction: on 1_A ⊗ y the map onto A∪B acts as the map onto B
        let y = random_matrix(&mut r, 4);
        let lifted = Operator::new(sites.clone(), 2, oracle_embed(&y, [false, true, true])).unwrap();
        let lhs = partial_trace(&lifted, &ab).unwrap();
        let rhs = partial_trace(&Operator::new(bc.clone(), 2, y).unwrap(), &b_only)
            .unwrap()
            .extend_to(&ab)
            .unwrap();
        worst_t1 = worst_t1.max(max_abs(&(lhs.matrix() - rhs.matrix())));

        // composition in both orders equals the map onto (A∪B)∩(B∪C) = B
        let bc_after_ab = partial_trace(&t_ab.extend_to(&sites).unwrap(), &bc).unwrap().extend_to(&sites).unwrap();
        let ab_after_bc = partial_trace(&t_bc.extend_to(&sites).unwrap(), &ab).unwrap().extend_to(&sites).unwrap();
        let onto_b = oracle_embed(&oracle_partial_trace(&m, [false, true, false]), [false, true, false]);
        let onto_c = oracle_embed(&oracle_partial_trace(&m, [false, false, true]), [false, false, true]);
        worst_t3 = worst_t3
            .max(max_abs(&(bc_after_ab.matrix() - ab_after_bc.matrix())))
            .max(max_abs(&(bc_after_ab.matrix() - onto_b)));
        literal_c = literal_c.max(max_abs(&(bc_after_ab.matrix() - onto_c)));
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = worst_oracle.max(worst_t1).max(worst_t3);
    verdict(
        worst < 1e-12 && secs < 5.0,
        format!(
            "oracle {worst_oracle:.1e}, restriction {worst_t1:.1e}, composition {worst_t3:.1e} \
             (onto C instead of B: {literal_c:.2}), {secs:.2}s"
        ),
    )
}

fn c2_density_recursion() -> Verdict {
    let start = Instant::now();
    let model = alpha_model();
    let s = model.shape();
    let mut state = model.level_state(0, Path::Dense).unwrap();
    let (mut trace_dev, mut marginal, mut oracle) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut dim = 0;
    for n in 0..2 {
        let next = advance_density(&state, model.rule()).unwrap();
        let next = FiniteState {
            density: next.density.normalized(),
            ..next
        };
        trace_dev = trace_dev.max((next.raw_trace - 1.0).abs()).max((next.density.trace() - 1.0).abs());
        let back = next.density.marginal(&ball(n, &s)).unwrap();
        marginal = marginal.max(back.max_abs_diff(&state.density).unwrap());
        let w = oracle_gibbs(0.1, 0.5, n + 1);
        let got = diagonal_of(&next.density);
        oracle = oracle.max(w.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        dim = next.density.to_dense().unwrap().dim();
        state = next;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        trace_dev < 1e-9 && marginal < 1e-9 && oracle < 1e-12 && dim <= 128 && secs < 30.0,
        format!("|Tr-1| {trace_dev:.1e}, marginal {marginal:.1e}, vs Gibbs {oracle:.1e}, dim {dim}, {secs:.2}s"),
    )
}

fn c3_entropy_identity() -> Verdict {
    let model = alpha_model();
    let t = identity_terms(&model, 1, Path::Dense).unwrap();
    // Λ_2 sites 0..7, W_1 = {1,2}, Λ_1 = {0,1,2}, Λ_[1,2] = {1..7}
    let w = oracle_gibbs(0.1, 0.5, 2);
    let oracle_terms = [
        shannon(&w),
        oracle_marginal_entropy(&w, 7, &[1, 2]),
        oracle_marginal_entropy(&w, 7, &[0, 1, 2]),
        oracle_marginal_entropy(&w, 7, &[1, 2, 3, 4, 5, 6]),
    ];
    let ours = [t.ball_next, t.level_set, t.ball, t.slab];
    let vs_oracle = ours.iter().zip(&oracle_terms).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let p = IsingParams::alpha(0.1, 0.5).unwrap();
    let raw_control = ising::ising_model_with_boundary(&p, CMatrix::identity(2, 2)).unwrap();
    let control = identity_terms(&raw_control, 1, Path::Dense).unwrap().defect();
    let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.25, 0.0),
    ]));
    let asym = ising::ising_model_with_boundary(&p, h).unwrap().with_normalization(true);
    let asym_defect = identity_terms(&asym, 1, Path::Dense).unwrap().defect();
    verdict(
        t.defect() < 1e-8 && vs_oracle < 1e-12 && control > 1e-3,
        format!(
            "defect {:.1e}, terms vs Gibbs {vs_oracle:.1e}; h=I control {control:.3e}, \
             normalized h=diag(1,1/4) control {asym_defect:.3e}",
            t.defect()
        ),
    )
}

fn c4_increment_formula() -> Verdict {
    let model = alpha_model();
    let comm = amplitude_commutator(&model, 1, Path::Dense).unwrap();
    let via_k = increment_via_amplitude(&model, 1, Path::Dense).unwrap();
    let direct = level_entropy(&model, 2, Path::Dense).unwrap().0 - level_entropy(&model, 1, Path::Dense).unwrap().0;
    // two parents in W_1, each contributing the child entropy
    let oracle = 2.0 * oracle_child_entropy(0.1, 0.5);
    verdict(
        comm < 1e-10 && (via_k - direct).abs() < 1e-8 && (direct - oracle).abs() < 1e-12,
        format!(
            "commutator {comm:.1e}, |via K - direct| {:.1e}, direct vs oracle {:.1e}",
            (via_k - direct).abs(),
            (direct - oracle).abs()
        ),
    )
}

fn c5_constancy() -> Verdict {
    let model = alpha_model();
    let s: Vec<f64> = (0..=2).map(|n| level_entropy(&model, n, Path::Diagonal).unwrap().0).collect();
    let shape = model.shape();
    let per0 = (s[1] - s[0]) / shape.level_size(0) as f64;
    let per1 = (s[2] - s[1]) / shape.level_size(1) as f64;
    verdict((per0 - per1).abs() < 1e-8, format!("{per0:.12} vs {per1:.12}, diff {:.1e}", (per0 - per1).abs()))
}

fn c6_closed_form() -> Verdict {
    let p = IsingParams::alpha(0.1, 0.5).unwrap();
    let model = ising::ising_model(&p).unwrap();
    let s0 = level_entropy(&model, 0, Path::Diagonal).unwrap().0;
    let s1 = level_entropy(&model, 1, Path::Diagonal).unwrap().0;
    let s3 = level_entropy(&model, 3, Path::Diagonal).unwrap().0;
    let from_levels = (s1 - s0) / 2.0;
    let cf = ising::ising_closed_form(&p);
    let oracle = oracle_child_entropy(0.1, 0.5) / 2.0;
    let direct = s3 / model.shape().ball_size(3) as f64;
    let rel = (direct - cf.value).abs() / cf.value;
    let audit = ising::sign_audit(&grid()).unwrap();
    verdict(
        (from_levels - cf.value).abs() < 1e-8 && (cf.value - oracle).abs() < 1e-12 && rel < 1e-2,
        format!(
            "s = {:.10} ({:?} sign, grid audit {audit:?}), levels {:.1e}, oracle {:.1e}, \
             S(Λ_3)/15 rel {rel:.1e}; literal display ±{:.6}",
            cf.value,
            cf.chosen,
            (from_levels - cf.value).abs(),
            (cf.value - oracle).abs(),
            cf.literal_plus
        ),
    )
}

fn grid() -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    pts.iter().flat_map(|&b| pts.iter().map(move |&j| (b, j))).collect()
}

fn c7_alpha_identity() -> Verdict {
    let mut worst = 0.0_f64;
    for (b, j) in grid() {
        let p = IsingParams::alpha(b, j).unwrap();
        let (theta, eta) = ((2.0 * b).exp(), (2.0 * b * j).exp());
        let alpha = 4.0 / (theta * theta * eta + 2.0 * theta + eta);
        let mut oracle = 0.0;
        for cfg in 0..8usize {
            let s = |i: usize| if (cfg >> (2 - i)) & 1 == 0 { 1.0 } else { -1.0 };
            // μ = 2β·(σ_x σ_1 + σ_x σ_2 + J σ_1 σ_2 + J + 2)/2
            let e = (s(0) * s(1) + s(0) * s(2) + j * s(1) * s(2) + j + 2.0) / 2.0;
            oracle += alpha * (2.0 * b * e).exp();
        }
        worst = worst
            .max((ising::normalization_sum(&p) - 8.0).abs())
            .max((oracle - 8.0).abs())
            .max((ising::alpha_of(&p) - alpha).abs());
    }
    verdict(worst < 1e-12, format!("max deviation {worst:.1e} over 100 points"))
}

fn c8_mixing() -> Verdict {
    let model = alpha_model();
    let rule = model.rule();
    let ra = RangeAlgebra::detect_diagonal(rule).unwrap();
    let mut ok = true;
    let mut min_pi = f64::INFINITY;
    for j in 1..=2 {
        let pi = pi_matrix(rule, j, &ra).unwrap();
        min_pi = min_pi.min(pi.min_entry());
        ok &= pi.is_strictly_positive();
        ok &= peripheral_spectrum(&pi.as_map()).is_trivial();
        ok &= peripheral_spectrum(&induced_map(rule, j).unwrap()).is_trivial();
    }
    let decay = correlation_decay(&model, &pauli::z(), &pauli::z(), 3, Path::Diagonal).unwrap();
    ok &= decay.is_strictly_decreasing();
    // oracle: σ_z σ_z correlation along the ray from the brute-force Gibbs measure
    let w = oracle_gibbs(0.1, 0.5, 3);
    let sites = [0usize, 1, 3, 7];
    let mut oracle_corr = Vec::new();
    for &far in &sites[1..] {
        let c: f64 = w
            .iter()
            .enumerate()
            .map(|(cfg, p)| {
                let s = |i: usize| if (cfg >> (14 - i)) & 1 == 0 { 1.0 } else { -1.0 };
                p * s(0) * s(far)
            })
            .sum();
        oracle_corr.push(c.abs());
    }
    let vs_oracle = decay
        .rows
        .iter()
        .zip(&oracle_corr)
        .map(|(r, o)| (r.correlation - o).abs())
        .fold(0.0, f64::max);
    ok &= vs_oracle < 1e-12;

    let flip = spin_flip_rule(2).unwrap();
    let flip_pi = pi_matrix(&flip, 1, &RangeAlgebra::detect_diagonal(&flip).unwrap()).unwrap();
    let flip_peripheral = peripheral_spectrum(&flip_pi.as_map()).peripheral.len();
    ok &= flip_peripheral >= 2;
    let corr: Vec<String> = decay.rows.iter().map(|r| format!("{:.3e}", r.correlation)).collect();
    verdict(
        ok,
        format!(
            "min π {min_pi:.4}, correlations [{}], vs Gibbs {vs_oracle:.1e}; spin-flip control has \
             {flip_peripheral} peripheral eigenvalues",
            corr.join(", ")
        ),
    )
}

fn c9_trace_state() -> Verdict {
    let model = QmsModel::trace_state(TreeShape::new(2, 2).unwrap());
    let ln2 = std::f64::consts::LN_2;
    let mut worst = 0.0_f64;
    for n in 0..=3 {
        for (_, s) in entropies_by_path(&model, n) {
            worst = worst.max((s - model.shape().ball_size(n) as f64 * ln2).abs());
        }
    }
    let mut means = Vec::new();
    for strategy in Strategy::ALL {
        let m = mean_entropy(&model, strategy, 3, Path::Auto).unwrap();
        worst = worst.max((m.value - ln2).abs());
        means.push(format!("{strategy} {:.1e}", (m.value - ln2).abs()));
    }
    verdict(worst < 1e-12, format!("max |S_n - |Λ_n| log 2| {worst:.1e}; mean entropy {}", means.join(", ")))
}

fn c10_path_equivalence() -> Verdict {
    let models = [
        ("alpha", alpha_model()),
        ("trace", QmsModel::trace_state(TreeShape::new(2, 2).unwrap())),
        ("h1", ising::ising_model(&IsingParams::new(1.0, 1.0, ising::Branch::H1).unwrap()).unwrap()),
    ];
    let mut worst = 0.0_f64;
    let mut compared = 0;
    for (_, m) in &models {
        for n in 0..=3 {
            let vals = entropies_by_path(m, n);
            for (i, (_, a)) in vals.iter().enumerate() {
                for (_, b) in &vals[i + 1..] {
                    worst = worst.max((a - b).abs());
                    compared += 1;
                }
            }
        }
    }
    verdict(worst < 1e-9 && compared > 0, format!("{compared} pairs, max difference {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("partial-trace identities", c1_partial_trace),
        ("density recursion", c2_density_recursion),
        ("entropy identity", c3_entropy_identity),
        ("increment formula", c4_increment_formula),
        ("increment constancy", c5_constancy),
        ("closed-form mean entropy", c6_closed_form),
        ("alpha normalization", c7_alpha_identity),
        ("strong mixing", c8_mixing),
        ("trace-state oracle", c9_trace_state),
        ("path equivalence", c10_path_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        println!("{} [{}] {name}: {}", if v.ok { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += usize::from(!v.ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
