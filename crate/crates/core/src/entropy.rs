//! Level entropies, the Markov entropy identity, increments and mean
//! entropy estimators.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{abs_matrix, herm_log_matrix, Operator};
use crate::qms::{level_amplitude, translation_invariance_defect, Path, QmsModel};
use crate::tolerances::COMMUTATOR_TOL;
use crate::tree::{ball, level_set, slab, TreeShape};

/// Entropy of a tree-indexed classical Markov chain from its transition
/// table, without enumerating configurations.
///
/// `S_n = H(μ_0) + Σ_{m<n} ⟨ν_m, h⟩` where `h(p)` is the entropy of the
/// children given parent `p` and `ν_m` is the summed single-site marginal
/// over `W_m`, propagated by `ν_{m+1} = ν_m Σ_j P_j`.
#[derive(Clone, Debug)]
pub struct FactorizedChain {
    shape: TreeShape,
    root: Vec<f64>,
    /// `child[j][p][c]`: marginal transition to child `j`.
    child: Vec<Vec<Vec<f64>>>,
    cond_entropy: Vec<f64>,
}

impl FactorizedChain {
    /// `table` holds `P(children | parent)` parent-major; rows must sum to one.
    pub fn new(shape: TreeShape, root: Vec<f64>, table: &[f64]) -> Result<Self> {
        let (k, d) = (shape.k, shape.d);
        let block = d.pow(k as u32);
        if table.len() != d * block || root.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d * block,
                got: table.len(),
            });
        }
        let mut child = vec![vec![vec![0.0; d]; d]; k];
        let mut cond_entropy = vec![0.0; d];
        for p in 0..d {
            let row = &table[p * block..(p + 1) * block];
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::StrategyInapplicable(format!(
                    "transition row {p} sums to {total}, factorization needs a unital rule"
                )));
            }
            for (kids, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    cond_entropy[p] -= w * w.ln();
                }
                for (j, cj) in child.iter_mut().enumerate() {
                    let digit = (kids / d.pow((k - 1 - j) as u32)) % d;
                    cj[p][digit] += w;
                }
            }
        }
        Ok(Self {
            shape,
            root,
            child,
            cond_entropy,
        })
    }

    /// Builds the chain of a diagonal unital model.
    pub fn from_model(model: &QmsModel) -> Result<Self> {
        if !model.is_diagonal() {
            return Err(Error::StrategyInapplicable(
                "factorized path needs a diagonal model".into(),
            ));
        }
        let table = model
            .rule()
            .transition_weights()
            .ok_or_else(|| Error::StrategyInapplicable("rule is not diagonal".into()))?;
        let d0 = model.initial_density()?;
        let root = (0..model.shape().d).map(|i| d0[(i, i)].re).collect();
        Self::new(model.shape(), root, &table)
    }

    /// `S_0, …, S_n`.
    pub fn entropies(&self, n: usize) -> Vec<f64> {
        let d = self.shape.d;
        let mut s = crate::linalg::raw_diag_entropy(&self.root).unwrap_or(f64::NAN);
        let mut nu = self.root.clone();
        let mut out = Vec::with_capacity(n + 1);
        out.push(s);
        for _ in 0..n {
            s += nu.iter().zip(&self.cond_entropy).map(|(a, b)| a * b).sum::<f64>();
            out.push(s);
            let mut next = vec![0.0; d];
            for cj in &self.child {
                for p in 0..d {
                    for c in 0..d {
                        next[c] += nu[p] * cj[p][c];
                    }
                }
            }
            nu = next;
        }
        out
    }
}

/// Dense or diagonal; the factorized path falls back to the best
/// materialized one.
fn materialized_path(model: &QmsModel, path: Path, n: usize) -> Result<Path> {
    match path {
        Path::Factorized => model.resolve_path(Path::Auto, n),
        p => model.resolve_path(p, n),
    }
}

/// `S(φ⌈Λ_n)` in nats together with the path that produced it.
///
/// `Auto` prefers the exact diagonal table, then the factorized chain, then
/// the dense density.
pub fn level_entropy(model: &QmsModel, n: usize, path: Path) -> Result<(f64, Path)> {
    let chosen = match path {
        Path::Auto => {
            if let Ok(p @ Path::Diagonal) = model.resolve_path(Path::Auto, n) {
                p
            } else if FactorizedChain::from_model(model).is_ok() {
                Path::Factorized
            } else {
                Path::Dense
            }
        }
        p => p,
    };
    if chosen == Path::Factorized {
        let chain = FactorizedChain::from_model(model)?;
        return Ok((chain.entropies(n)[n], Path::Factorized));
    }
    let st = model.level_state(n, materialized_path(model, chosen, n)?)?;
    Ok((st.density.entropy()?, st.path()))
}

/// The four entropies of the Markov identity at level `n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityTerms {
    pub ball_next: f64,
    pub level_set: f64,
    pub ball: f64,
    pub slab: f64,
}

impl IdentityTerms {
    /// `|S(Λ_{n+1}) + S(W_n) − S(Λ_n) − S(Λ_{[n,n+1]})|`.
    pub fn defect(&self) -> f64 {
        (self.ball_next + self.level_set - self.ball - self.slab).abs()
    }
}

/// Regions inside `Λ_n` are read from `D_n`, the others from `D_{n+1}`.
pub fn identity_terms(model: &QmsModel, n: usize, path: Path) -> Result<IdentityTerms> {
    let shape = model.shape();
    let path = materialized_path(model, path, n + 1)?;
    let states = model.level_states(n + 1, path)?;
    let (dn, dn1) = (&states[n].density, &states[n + 1].density);
    Ok(IdentityTerms {
        ball_next: dn1.entropy()?,
        level_set: dn.marginal(&level_set(n, &shape))?.entropy()?,
        ball: dn.entropy()?,
        slab: dn1.marginal(&slab(n, n + 1, &shape))?.entropy()?,
    })
}

pub fn entropy_identity_defect(model: &QmsModel, n: usize, path: Path) -> Result<f64> {
    Ok(identity_terms(model, n, path)?.defect())
}

/// `‖[K_{[n,n+1]}, D_n ⊗ 1]‖_max`; zero without computation for diagonal
/// models.
pub fn amplitude_commutator(model: &QmsModel, n: usize, path: Path) -> Result<f64> {
    if model.is_diagonal() {
        return Ok(0.0);
    }
    let path = materialized_path(model, path, n + 1)?;
    let st = model.level_state(n, path)?;
    let target = ball(n + 1, &model.shape());
    let k = level_amplitude(model.rule(), n)?.extend_to(&target)?;
    let d = st.density.to_dense()?.extend_to(&target)?;
    k.commutator_norm(&d)
}

/// `−2 Σ_{x ∈ W_n} φ(log|K_{{x} ∪ S(x)}|)`, after verifying that the
/// level amplitude commutes with `D_n`.
pub fn increment_via_amplitude(model: &QmsModel, n: usize, path: Path) -> Result<f64> {
    let comm = amplitude_commutator(model, n, path)?;
    if comm > COMMUTATOR_TOL {
        return Err(Error::HypothesisViolated(format!(
            "‖[K, D_n]‖ = {comm:.3e} exceeds {COMMUTATOR_TOL:.0e}"
        )));
    }
    if path == Path::Factorized {
        // ⟨ν_n, h⟩ is the same sum evaluated on single-site marginals
        let s = FactorizedChain::from_model(model)?.entropies(n + 1);
        return Ok(s[n + 1] - s[n]);
    }
    let shape = model.shape();
    let log_abs = herm_log_matrix(&abs_matrix(model.rule().amplitude())?)?;
    let path = materialized_path(model, path, n + 1)?;
    let next = model.level_state(n + 1, path)?;
    let mut total = 0.0;
    for x in level_set(n, &shape).iter() {
        let op = Operator::new(shape.block(x), shape.d, log_abs.clone())?;
        total += next.density.expectation(&op)?.re;
    }
    Ok(-2.0 * total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DirectRatio,
    IncrementRatio,
    ClosedForm,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::DirectRatio, Strategy::IncrementRatio, Strategy::ClosedForm];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::DirectRatio => "direct_ratio",
            Strategy::IncrementRatio => "increment_ratio",
            Strategy::ClosedForm => "closed_form",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "direct_ratio" => Ok(Strategy::DirectRatio),
            "increment_ratio" => Ok(Strategy::IncrementRatio),
            "closed_form" => Ok(Strategy::ClosedForm),
            other => Err(Error::InvalidParameter(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanEntropy {
    pub strategy: Strategy,
    pub value: f64,
    /// `(n, estimate)` pairs; one entry for the closed form.
    pub table: Vec<(usize, f64)>,
    /// Aitken Δ² extrapolation of the last three direct ratios.
    pub aitken: Option<f64>,
    pub path: Path,
}

/// Aitken Δ² on the last three terms; `None` for shorter sequences.
pub fn aitken(seq: &[f64]) -> Option<f64> {
    let [x0, x1, x2] = seq.get(seq.len().checked_sub(3)?..)? else {
        return None;
    };
    let denom = (x2 - x1) - (x1 - x0);
    if denom.abs() < 1e-300 || !denom.is_finite() {
        return Some(*x2);
    }
    Some(x2 - (x2 - x1) * (x2 - x1) / denom)
}

fn entropies_up_to(model: &QmsModel, n_max: usize, path: Path) -> Result<(Vec<f64>, Path)> {
    let (_, chosen) = level_entropy(model, n_max, path)?;
    if chosen == Path::Factorized {
        return Ok((FactorizedChain::from_model(model)?.entropies(n_max), chosen));
    }
    let states = model.level_states(n_max, chosen)?;
    let s = states
        .iter()
        .map(|st| st.density.entropy())
        .collect::<Result<Vec<_>>>()?;
    Ok((s, chosen))
}

/// Mean entropy by one strategy. `n_max` bounds the computed levels for
/// the sequence strategies.
pub fn mean_entropy(model: &QmsModel, strategy: Strategy, n_max: usize, path: Path) -> Result<MeanEntropy> {
    let shape = model.shape();
    match strategy {
        Strategy::DirectRatio => {
            let (s, chosen) = entropies_up_to(model, n_max, path)?;
            let table: Vec<(usize, f64)> = s
                .iter()
                .enumerate()
                .map(|(n, &v)| (n, v / shape.ball_size(n) as f64))
                .collect();
            let seq: Vec<f64> = table.iter().map(|t| t.1).collect();
            Ok(MeanEntropy {
                strategy,
                value: *seq.last().expect("n_max >= 0"),
                aitken: aitken(&seq),
                table,
                path: chosen,
            })
        }
        Strategy::IncrementRatio => {
            if n_max == 0 {
                return Err(Error::InvalidParameter("increment ratio needs n_max >= 1".into()));
            }
            let (s, chosen) = entropies_up_to(model, n_max, path)?;
            let table: Vec<(usize, f64)> = (0..n_max)
                .map(|n| (n, (s[n + 1] - s[n]) / shape.level_size(n + 1) as f64))
                .collect();
            Ok(MeanEntropy {
                strategy,
                value: table.last().expect("non-empty").1,
                aitken: None,
                table,
                path: chosen,
            })
        }
        Strategy::ClosedForm => {
            let ti = translation_invariance_defect(model, 0, Path::Auto)?;
            if ti > crate::tolerances::COMPATIBILITY_TOL {
                return Err(Error::StrategyInapplicable(format!(
                    "state is not translation invariant (defect {ti:.3e})"
                )));
            }
            let comm = amplitude_commutator(model, 0, Path::Auto)?;
            if comm > COMMUTATOR_TOL {
                return Err(Error::StrategyInapplicable(format!(
                    "amplitude does not commute with the root density ({comm:.3e})"
                )));
            }
            let (s0, chosen) = level_entropy(model, 0, path)?;
            let (s1, _) = level_entropy(model, 1, path)?;
            let value = (s1 - s0) / shape.k as f64;
            Ok(MeanEntropy {
                strategy,
                value,
                table: vec![(1, value)],
                aitken: None,
                path: chosen,
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub n: usize,
    pub ball_size: usize,
    pub entropy: f64,
    pub slab_entropy: Option<f64>,
    pub level_set_entropy: Option<f64>,
    /// `S_{n+1} − S_n`.
    pub increment: Option<f64>,
    /// `ΔS_n / |W_n|`.
    pub increment_per_boundary: Option<f64>,
    /// `S_n / |Λ_n|`.
    pub direct_ratio: f64,
    /// `ΔS_n / (|Λ_{n+1}| − |Λ_n|)`.
    pub estimator: Option<f64>,
    pub path: Path,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyLedger {
    pub k: usize,
    pub d: usize,
    pub rows: Vec<LedgerRow>,
    pub aitken: Option<f64>,
    pub notes: Vec<String>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.15e}")).unwrap_or_default()
}

impl EntropyLedger {
    /// Levels `0..=n_max`; slab and level-set entropies are filled in where
    /// a materialized density is available.
    pub fn build(model: &QmsModel, n_max: usize, path: Path) -> Result<Self> {
        let shape = model.shape();
        let (s, chosen) = entropies_up_to(model, n_max, path)?;
        let states = match chosen {
            Path::Factorized => None,
            p => Some(model.level_states(n_max, p)?),
        };
        let mut rows = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let increment = s.get(n + 1).map(|next| next - s[n]);
            let (slab_entropy, level_set_entropy) = match &states {
                Some(st) => (
                    st.get(n + 1)
                        .map(|x| x.density.marginal(&slab(n, n + 1, &shape))?.entropy())
                        .transpose()?,
                    Some(st[n].density.marginal(&level_set(n, &shape))?.entropy()?),
                ),
                None => (None, None),
            };
            rows.push(LedgerRow {
                n,
                ball_size: shape.ball_size(n),
                entropy: s[n],
                slab_entropy,
                level_set_entropy,
                increment,
                increment_per_boundary: increment.map(|x| x / shape.level_size(n) as f64),
                direct_ratio: s[n] / shape.ball_size(n) as f64,
                estimator: increment.map(|x| x / (shape.ball_size(n + 1) - shape.ball_size(n)) as f64),
                path: chosen,
            });
        }
        let seq: Vec<f64> = rows.iter().map(|r| r.direct_ratio).collect();
        let mut notes = Vec::new();
        if !model.is_consistent() {
            notes.push(format!(
                "transition rule is not unital (defect {:.3e}); entropies use raw densities",
                model.rule().unitality_defect()
            ));
        }
        Ok(Self {
            k: shape.k,
            d: shape.d,
            rows,
            aitken: aitken(&seq),
            notes,
        })
    }

    /// Largest deviation of `0 ≤ S_n ≤ |Λ_n| log d`.
    pub fn bound_violation(&self) -> f64 {
        let ln_d = (self.d as f64).ln();
        self.rows
            .iter()
            .map(|r| (-r.entropy).max(r.entropy - r.ball_size as f64 * ln_d).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Checks `ΔS_n / k^{n+1} = w_{n+1} r_{n+1} − w'_n r_n` with
    /// `w_{n+1} = (k^{n+2} − 1)/((k − 1) k^{n+1})`, `w'_n = (k^{n+1} − 1)/((k − 1) k^{n+1})`
    /// and `r_n = S_n / |Λ_n|`.
    pub fn telescoping_defect(&self) -> f64 {
        let k = self.k as f64;
        let ball = |m: i32| {
            if self.k == 1 {
                m as f64
            } else {
                (k.powi(m) - 1.0) / (k - 1.0)
            }
        };
        self.rows
            .windows(2)
            .filter_map(|w| {
                let est = w[0].estimator?;
                let n = w[0].n as i32;
                let scale = k.powi(n + 1);
                let rhs = ball(n + 2) / scale * w[1].direct_ratio - ball(n + 1) / scale * w[0].direct_ratio;
                Some((est - rhs).abs())
            })
            .fold(0.0, f64::max)
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "n",
        "ball_size",
        "S_n",
        "delta_S_n",
        "delta_S_n_per_boundary",
        "direct_ratio",
        "estimator",
        "path",
        "slab_entropy",
        "level_set_entropy",
    ];

    /// CSV with `# key: value` metadata lines before the header.
    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (key, value) in metadata {
            writeln!(out, "# {key}: {value}")?;
        }
        for note in &self.notes {
            writeln!(out, "# note: {note}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.ball_size.to_string(),
                format!("{:.15e}", r.entropy),
                fmt_opt(r.increment),
                fmt_opt(r.increment_per_boundary),
                format!("{:.15e}", r.direct_ratio),
                fmt_opt(r.estimator),
                r.path.to_string(),
                fmt_opt(r.slab_entropy),
                fmt_opt(r.level_set_entropy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `S_n` on every applicable path for cross-checking; missing paths are
/// skipped.
pub fn entropies_by_path(model: &QmsModel, n: usize) -> Vec<(Path, f64)> {
    [Path::Dense, Path::Diagonal, Path::Factorized]
        .into_iter()
        .filter_map(|p| level_entropy(model, n, p).ok().map(|(s, _)| (p, s)))
        .collect()
}
