use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use num_complex::Complex64;
use qms_core::entropy::{identity_terms, increment_via_amplitude, mean_entropy, EntropyLedger, Strategy};
use qms_core::ising::{self, Branch, IsingParams};
use qms_core::linalg::CMatrix;
use qms_core::mixing::{
    correlation_decay, induced_map, peripheral_spectrum, pi_matrix, PeripheralReport, RangeAlgebra,
};
use qms_core::qms::{check_compatibility, translation_invariance_defect, Path, QmsModel, TransitionRule};
use qms_core::tolerances::{COMPATIBILITY_TOL, DENSITY_TOL};
use qms_core::tree::TreeShape;
use qms_core::Error;
use serde::Serialize;

use crate::config::{read_amplitude, ModelKind, ModelSpec};
use crate::output::{self, create, metadata, write_json};

/// Result of a command: whether every applicable check passed, the files
/// written and one summary line per check.
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

#[derive(Serialize, Clone, Debug)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// Reported, never fails the run.
    Info,
}

#[derive(Serialize, Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub n: Option<usize>,
    pub defect: Option<f64>,
    pub tol: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn measured(name: &'static str, n: Option<usize>, defect: f64, tol: f64) -> Self {
        let status = if defect <= tol { Status::Pass } else { Status::Fail };
        Self {
            name,
            n,
            defect: Some(defect),
            tol,
            status,
            note: None,
        }
    }

    fn skipped(name: &'static str, n: Option<usize>, tol: f64, why: String) -> Self {
        Self {
            name,
            n,
            defect: None,
            tol,
            status: Status::Skipped,
            note: Some(why),
        }
    }

    fn failed(&self) -> bool {
        matches!(self.status, Status::Fail)
    }

    fn line(&self) -> String {
        let level = self.n.map(|n| format!(" n={n}")).unwrap_or_default();
        match (&self.status, self.defect) {
            (Status::Info, d) => format!(
                "INFO {}{level}: {}",
                self.name,
                d.map(|d| format!("{d:.3e}")).unwrap_or_default()
            ),
            (Status::Skipped, _) => format!(
                "SKIP {}{level}: {}",
                self.name,
                self.note.as_deref().unwrap_or("")
            ),
            (s, Some(d)) => format!(
                "{} {}{level}: {d:.3e} (tol {:.1e})",
                if matches!(s, Status::Pass) { "PASS" } else { "FAIL" },
                self.name,
                self.tol
            ),
            (_, None) => format!("FAIL {}{level}", self.name),
        }
    }
}

fn diag(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (i, &x) in values.iter().enumerate() {
        m[(i, i)] = Complex64::new(x, 0.0);
    }
    m
}

fn ising_params(spec: &ModelSpec) -> Result<IsingParams> {
    Ok(IsingParams::new(
        spec.beta.context("missing beta")?,
        spec.j.context("missing J")?,
        spec.branch.unwrap_or(Branch::HAlpha),
    )?)
}

/// Builds the model described by `spec`; for amplitude files the declared
/// `k` and `d` replace the ones in the spec.
pub fn build_model(spec: &mut ModelSpec) -> Result<QmsModel> {
    let model = match spec.model {
        ModelKind::Ising => {
            let p = ising_params(spec)?;
            match &spec.boundary {
                Some(h) => ising::ising_model_with_boundary(&p, diag(h))?,
                None => ising::ising_model(&p)?,
            }
        }
        ModelKind::TraceState => QmsModel::trace_state(TreeShape::new(spec.k, spec.d)?),
        ModelKind::CustomAmplitude => {
            let file = spec.amplitude.clone().context("missing amplitude file")?;
            let (k, d, entries) = read_amplitude(&file)?;
            spec.k = k;
            spec.d = d;
            let shape = TreeShape::new(k, d)?;
            let dim = d.pow(k as u32 + 1);
            let rule = TransitionRule::new(shape, CMatrix::from_row_slice(dim, dim, &entries))
                .with_context(|| format!("loading {}", file.display()))?;
            let root = CMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
            QmsModel::from_rule(rule, root)?
        }
    };
    Ok(model.with_normalization(spec.normalize))
}

fn unit_scale(spec: &ModelSpec) -> f64 {
    if spec.bits {
        1.0 / std::f64::consts::LN_2
    } else {
        1.0
    }
}

fn scale_ledger(ledger: &mut EntropyLedger, f: f64) {
    let s = |x: &mut Option<f64>| *x = x.map(|v| v * f);
    for r in &mut ledger.rows {
        r.entropy *= f;
        r.direct_ratio *= f;
        s(&mut r.slab_entropy);
        s(&mut r.level_set_entropy);
        s(&mut r.increment);
        s(&mut r.increment_per_boundary);
        s(&mut r.estimator);
    }
    ledger.aitken = ledger.aitken.map(|v| v * f);
}

#[derive(Serialize)]
struct MeanRow {
    strategy: Strategy,
    value: Option<f64>,
    aitken: Option<f64>,
    path: Option<Path>,
    note: Option<String>,
}

#[derive(Serialize)]
struct EntropyReport<'a> {
    passed: bool,
    checks: &'a [Check],
    mean_entropy: Vec<MeanRow>,
    closed_form: Option<ising::ClosedForm>,
    ledger: &'a EntropyLedger,
}

pub fn entropy(spec: &mut ModelSpec) -> Result<Outcome> {
    let model = build_model(spec)?;
    let tol = spec.tol;
    let n_max = spec.n_max;
    let mut ledger = EntropyLedger::build(&model, n_max, spec.path)?;
    let mut checks = Vec::new();

    let chosen = ledger.rows[0].path;
    if chosen == Path::Factorized {
        checks.push(Check::skipped(
            "entropy_identity",
            None,
            tol,
            "factorized path keeps no densities".into(),
        ));
    } else {
        for n in 0..n_max {
            let t = identity_terms(&model, n, chosen)?;
            checks.push(Check::measured("entropy_identity", Some(n), t.defect(), tol));
        }
        for n in 0..n_max {
            let direct = ledger.rows[n].increment.expect("n < n_max");
            match increment_via_amplitude(&model, n, chosen) {
                Ok(v) => checks.push(Check::measured("increment_formula", Some(n), (v - direct).abs(), tol)),
                Err(Error::HypothesisViolated(why)) => {
                    checks.push(Check::skipped("increment_formula", Some(n), tol, why))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if model.is_consistent() || model.normalize() {
        checks.push(Check::measured("entropy_bounds", None, ledger.bound_violation(), tol));
    }
    checks.push(Check::measured("telescoping", None, ledger.telescoping_defect(), tol));

    let ti = translation_invariance_defect(&model, 0, Path::Auto).unwrap_or(f64::INFINITY);
    if n_max < 2 {
        checks.push(Check::skipped("constancy", None, tol, "needs n_max >= 2".into()));
    } else if ti > COMPATIBILITY_TOL {
        checks.push(Check::skipped(
            "constancy",
            None,
            tol,
            format!("state is not translation invariant (defect {ti:.3e})"),
        ));
    } else {
        let per: Vec<f64> = ledger.rows.iter().filter_map(|r| r.increment_per_boundary).collect();
        let spread = per.iter().map(|x| (x - per[0]).abs()).fold(0.0, f64::max);
        checks.push(Check::measured("constancy", None, spread, tol));
    }

    let mut closed_form = None;
    if spec.model == ModelKind::Ising && spec.boundary.is_none() && spec.branch == Some(Branch::HAlpha) {
        let cf = ising::ising_closed_form(&ising_params(spec)?);
        if n_max >= 1 {
            let from_levels = ledger.rows[0].increment.expect("n_max >= 1") / 2.0;
            checks.push(Check::measured("closed_form", None, (cf.value - from_levels).abs(), tol));
        }
        closed_form = Some(cf);
    }

    let f = unit_scale(spec);
    let mean = Strategy::ALL
        .iter()
        .map(|&s| match mean_entropy(&model, s, n_max, spec.path) {
            Ok(m) => MeanRow {
                strategy: s,
                value: Some(m.value * f),
                aitken: m.aitken.map(|v| v * f),
                path: Some(m.path),
                note: None,
            },
            Err(e) => MeanRow {
                strategy: s,
                value: None,
                aitken: None,
                path: None,
                note: Some(e.to_string()),
            },
        })
        .collect();
    if let Some(cf) = closed_form.as_mut() {
        cf.value *= f;
    }

    scale_ledger(&mut ledger, f);
    let passed = !checks.iter().any(Check::failed);
    let (csv_path, mut out) = create(spec, "entropy_ledger.csv")?;
    ledger.write_csv(&mut out, &metadata(spec))?;
    out.flush()?;
    let json_path = write_json(
        spec,
        "entropy_ledger.json",
        &EntropyReport {
            passed,
            checks: &checks,
            mean_entropy: mean,
            closed_form,
            ledger: &ledger,
        },
    )?;
    Ok(Outcome {
        passed,
        files: vec![csv_path, json_path],
        lines: checks.iter().map(Check::line).collect(),
    })
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    passed: bool,
    checks: &'a [Check],
    compatibility: &'a qms_core::qms::CompatibilityReport,
    boundary_residual: Option<f64>,
}

pub fn verify(spec: &mut ModelSpec) -> Result<Outcome> {
    let model = build_model(spec)?;
    let tol = spec.tol;
    let report = check_compatibility(&model, spec.n_max, spec.path, spec.seed);
    let mut checks = Vec::new();
    for r in &report.rows {
        match &r.note {
            Some(note) => checks.push(Check {
                name: "compatibility",
                n: Some(r.n),
                defect: None,
                tol,
                status: Status::Fail,
                note: Some(note.clone()),
            }),
            None => {
                checks.push(Check::measured("functional", Some(r.n), r.functional_defect, tol));
                checks.push(Check::measured("marginal", Some(r.n), r.marginal_defect, tol));
                // raw traces are recorded before any renormalization
                if model.is_consistent() {
                    let dev = (r.trace_n - 1.0).abs().max((r.trace_n1 - 1.0).abs());
                    checks.push(Check::measured("unit_trace", Some(r.n), dev, tol));
                }
            }
        }
    }
    match translation_invariance_defect(&model, 0, report.path) {
        Ok(d) => checks.push(Check {
            status: Status::Info,
            ..Check::measured("translation_invariance", Some(0), d, COMPATIBILITY_TOL)
        }),
        Err(e) => checks.push(Check::skipped("translation_invariance", Some(0), tol, e.to_string())),
    }
    let boundary_residual = match spec.model {
        ModelKind::Ising => Some(ising::boundary_residual_of(&ising_params(spec)?, model.boundary().h())?),
        _ => None,
    };
    if let Some(res) = boundary_residual {
        checks.push(Check::measured("boundary_fixed_point", None, res, tol));
    }

    let passed = !checks.iter().any(Check::failed);
    let (csv_path, mut out) = create(spec, "verify.csv")?;
    for (k, v) in metadata(spec) {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "# path: {}", report.path)?;
    writeln!(
        out,
        "n,functional_defect,marginal_defect,recursion_defect,trace_n,trace_n1,basis,note"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{},{}",
            r.n,
            r.functional_defect,
            r.marginal_defect,
            r.recursion_defect,
            r.trace_n,
            r.trace_n1,
            r.basis,
            r.note.as_deref().unwrap_or("").replace(',', ";")
        )?;
    }
    out.flush()?;
    let json_path = write_json(
        spec,
        "verify.json",
        &VerifyReport {
            passed,
            checks: &checks,
            compatibility: &report,
            boundary_residual,
        },
    )?;
    Ok(Outcome {
        passed,
        files: vec![csv_path, json_path],
        lines: checks.iter().map(Check::line).collect(),
    })
}

#[derive(Serialize)]
struct ChildReport {
    j: usize,
    pi: Vec<Vec<f64>>,
    stationary: Option<Vec<f64>>,
    projection_spectrum: PeripheralReport,
    matrix_unit_spectrum: PeripheralReport,
}

#[derive(Serialize)]
struct MixingReport<'a> {
    passed: bool,
    checks: &'a [Check],
    range_block_dims: Vec<usize>,
    children: Vec<ChildReport>,
    decay: &'a qms_core::mixing::DecayTable,
}

/// `diag(1, …, −1)`, equal to `σ_z` for spin 1/2.
fn clock_observable(d: usize) -> CMatrix {
    let values: Vec<f64> = (0..d).map(|i| 1.0 - 2.0 * i as f64 / (d - 1) as f64).collect();
    diag(&values)
}

pub fn mixing(spec: &mut ModelSpec) -> Result<Outcome> {
    let model = build_model(spec)?;
    let rule = model.rule();
    let k = rule.shape().k;
    let d = rule.shape().d;
    let ra = RangeAlgebra::detect_diagonal(rule).unwrap_or_else(|_| RangeAlgebra::trivial(d));
    let mut checks = Vec::new();
    let mut children = Vec::with_capacity(k);
    for j in 1..=k {
        let pi = pi_matrix(rule, j, &ra)?;
        let proj = peripheral_spectrum(&pi.as_map());
        let full = peripheral_spectrum(&induced_map(rule, j)?);
        let min = pi.min_entry();
        checks.push(if min > 0.0 {
            Check::measured("pi_positive", Some(j), 0.0, 0.0)
        } else {
            Check {
                name: "pi_positive",
                n: Some(j),
                defect: Some(-min),
                tol: 0.0,
                status: Status::Fail,
                note: Some(format!("smallest entry {min:.3e}")),
            }
        });
        for (name, rep) in [("peripheral_projection", &proj), ("peripheral_matrix_units", &full)] {
            checks.push(Check {
                name,
                n: Some(j),
                defect: Some(rep.peripheral.len() as f64 - 1.0),
                tol: 0.0,
                status: if rep.is_trivial() { Status::Pass } else { Status::Fail },
                note: Some(format!("{} peripheral eigenvalue(s)", rep.peripheral.len())),
            });
        }
        children.push(ChildReport {
            j,
            pi: pi.entries.clone(),
            stationary: pi.stationary().ok(),
            projection_spectrum: proj,
            matrix_unit_spectrum: full,
        });
    }

    let z = clock_observable(d);
    let decay = correlation_decay(&model, &z, &z, spec.n_max, spec.path)?;
    let all_zero = decay.rows.iter().all(|r| r.correlation < DENSITY_TOL);
    checks.push(Check {
        name: "correlation_decay",
        n: None,
        defect: decay.rows.last().map(|r| r.correlation),
        tol: 0.0,
        status: if all_zero || decay.is_strictly_decreasing() {
            Status::Pass
        } else {
            Status::Fail
        },
        note: Some(if all_zero {
            "correlations vanish".into()
        } else {
            format!("second eigenvalue modulus {:.6}", decay.second_modulus)
        }),
    });

    let passed = !checks.iter().any(Check::failed);
    let (csv_path, mut out) = create(spec, "decay.csv")?;
    decay.write_csv(&mut out, &metadata(spec))?;
    out.flush()?;
    let json_path = write_json(
        spec,
        "mixing.json",
        &MixingReport {
            passed,
            checks: &checks,
            range_block_dims: ra.block_dims(),
            children,
            decay: &decay,
        },
    )?;
    Ok(Outcome {
        passed,
        files: vec![csv_path, json_path],
        lines: checks
            .iter()
            .map(|c| match (&c.status, &c.note) {
                (Status::Pass, Some(n)) => format!("PASS {}{}: {n}", c.name, fmt_child(c.n)),
                (Status::Pass, None) => format!("PASS {}{}", c.name, fmt_child(c.n)),
                (_, n) => format!("FAIL {}{}: {}", c.name, fmt_child(c.n), n.as_deref().unwrap_or("")),
            })
            .collect(),
    })
}

fn fmt_child(j: Option<usize>) -> String {
    j.map(|j| format!(" j={j}")).unwrap_or_default()
}

pub fn sweep(spec: &mut ModelSpec) -> Result<Outcome> {
    let f = unit_scale(spec);
    let (csv_path, mut out) = create(spec, "sweep.csv")?;
    for (k, v) in metadata(spec) {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "beta,J,alpha,s_closed_form,direct_ratio,aitken,rel_discrepancy,path")?;
    let mut worst = 0.0_f64;
    for &beta in &spec.betas {
        for &j in &spec.js {
            let p = IsingParams::new(beta, j, Branch::HAlpha)?;
            let model = ising::ising_model(&p)?.with_normalization(spec.normalize);
            let cf = ising::ising_closed_form(&p);
            let m = mean_entropy(&model, Strategy::DirectRatio, spec.n_max, spec.path)?;
            let rel = (m.value - cf.value).abs() / cf.value.abs();
            worst = worst.max(rel);
            writeln!(
                out,
                "{beta},{j},{:.15e},{:.15e},{:.15e},{},{:.15e},{}",
                ising::alpha_of(&p),
                cf.value * f,
                m.value * f,
                m.aitken.map(|a| format!("{:.15e}", a * f)).unwrap_or_default(),
                rel,
                m.path
            )?;
        }
    }
    out.flush()?;
    let check = Check::measured("sweep_discrepancy", None, worst, spec.tol);
    Ok(Outcome {
        passed: !check.failed(),
        files: vec![csv_path],
        lines: vec![
            format!("{} grid points", spec.betas.len() * spec.js.len()),
            check.line(),
        ],
    })
}

pub fn describe(files: &[PathBuf]) -> String {
    files.iter().map(|p| output::display(p)).collect::<Vec<_>>().join(", ")
}
