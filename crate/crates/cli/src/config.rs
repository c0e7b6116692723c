use std::path::{Path as FsPath, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use num_complex::Complex64;
use qms_core::ising::Branch;
use qms_core::qms::Path;
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "QMS_OUT_DIR";
const MAX_GRID_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelKind {
    Ising,
    TraceState,
    CustomAmplitude,
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// TOML file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "J")]
    pub j: Option<f64>,
    /// h1, h2 or h_alpha.
    #[arg(long)]
    pub branch: Option<String>,
    /// Diagonal of a boundary operator replacing the branch solution,
    /// comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub boundary: Option<Vec<f64>>,
    /// Amplitude file for the custom_amplitude model.
    #[arg(long)]
    pub amplitude: Option<PathBuf>,
    /// auto, dense, diagonal or factorized.
    #[arg(long)]
    pub path: Option<String>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Renormalize level densities to unit trace.
    #[arg(long)]
    pub normalize: bool,
    /// Output directory; defaults to $QMS_OUT_DIR, then the current directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    /// Sweep values of beta: `a,b,c` or `start:stop:count`.
    #[arg(long)]
    pub betas: Option<String>,
    /// Sweep values of J, same syntax as --betas.
    #[arg(long = "Js")]
    pub js: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<ModelKind>,
    k: Option<usize>,
    d: Option<usize>,
    beta: Option<f64>,
    #[serde(rename = "J")]
    j: Option<f64>,
    branch: Option<String>,
    boundary: Option<Vec<f64>>,
    amplitude: Option<PathBuf>,
    path: Option<String>,
    n_max: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    normalize: Option<bool>,
    out_dir: Option<PathBuf>,
    bits: Option<bool>,
    betas: Option<Grid>,
    #[serde(rename = "Js")]
    js: Option<Grid>,
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum Grid {
    List(Vec<f64>),
    Spec(String),
}

impl Grid {
    fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Spec(s) => parse_grid(s),
        }
    }
}

/// `a,b,c` or `start:stop:count` with `count` evenly spaced points
/// including both ends.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (a, b): (f64, f64) = (start.parse()?, stop.parse()?);
            let n: usize = count.parse()?;
            match n {
                0 => bail!("grid '{s}' has no points"),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        [_] => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad grid value '{x}'")))
            .collect(),
        _ => bail!("grid '{s}' is neither a list nor start:stop:count"),
    }
}

/// Fully resolved run configuration, embedded in every output header.
#[derive(Serialize, Debug, Clone)]
pub struct ModelSpec {
    pub command: String,
    pub model: ModelKind,
    pub k: usize,
    pub d: usize,
    pub beta: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub branch: Option<Branch>,
    pub boundary: Option<Vec<f64>>,
    pub amplitude: Option<PathBuf>,
    pub path: Path,
    pub n_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub normalize: bool,
    pub bits: bool,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
    #[serde(rename = "Js", skip_serializing_if = "Vec::is_empty")]
    pub js: Vec<f64>,
}

/// Per-command defaults for `n_max` and `tol`.
pub struct Defaults {
    pub n_max: usize,
    pub tol: f64,
}

impl ModelSpec {
    pub fn resolve(command: &str, flags: &Flags, defaults: Defaults) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        let base = flags.config.as_deref().and_then(FsPath::parent).unwrap_or(FsPath::new(""));

        let model = flags.model.or(file.model).unwrap_or(ModelKind::Ising);
        let path = match flags.path.as_deref().or(file.path.as_deref()) {
            Some(s) => s.parse::<Path>()?,
            None => Path::Auto,
        };
        let branch = flags
            .branch
            .as_deref()
            .or(file.branch.as_deref())
            .map(str::parse::<Branch>)
            .transpose()?;
        let amplitude = flags
            .amplitude
            .clone()
            .or_else(|| file.amplitude.map(|p| if p.is_relative() { base.join(p) } else { p }));
        let out_dir = flags
            .out_dir
            .clone()
            .or(file.out_dir)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let grid = |flag: &Option<String>, cfg: &Option<Grid>| -> Result<Vec<f64>> {
            match (flag, cfg) {
                (Some(s), _) => parse_grid(s),
                (None, Some(g)) => g.values(),
                (None, None) => Ok(Vec::new()),
            }
        };

        let mut spec = ModelSpec {
            command: command.to_string(),
            model,
            k: flags.k.or(file.k).unwrap_or(2),
            d: flags.d.or(file.d).unwrap_or(2),
            beta: flags.beta.or(file.beta),
            j: flags.j.or(file.j),
            branch,
            boundary: flags.boundary.clone().or(file.boundary),
            amplitude,
            path,
            n_max: flags.n_max.or(file.n_max).unwrap_or(defaults.n_max),
            tol: flags.tol.or(file.tol).unwrap_or(defaults.tol),
            seed: flags.seed.or(file.seed).unwrap_or(qms_core::tolerances::DEFAULT_SEED),
            normalize: flags.normalize || file.normalize.unwrap_or(false),
            bits: flags.bits || file.bits.unwrap_or(false),
            out_dir,
            betas: grid(&flags.betas, &file.betas)?,
            js: grid(&flags.js, &file.js)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&mut self) -> Result<()> {
        if self.k < 1 || self.d < 2 {
            bail!("need k >= 1 and d >= 2 (got k={}, d={})", self.k, self.d);
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            bail!("tolerance must be positive");
        }
        match self.model {
            ModelKind::Ising => {
                if (self.k, self.d) != (2, 2) {
                    bail!("the ising model lives on the binary tree with spin 1/2 (k=2, d=2)");
                }
                if self.command == "sweep" {
                    self.branch.get_or_insert(Branch::HAlpha);
                    if self.betas.is_empty() {
                        self.betas = self.beta.into_iter().collect();
                    }
                    if self.js.is_empty() {
                        self.js = self.j.into_iter().collect();
                    }
                    if self.betas.is_empty() || self.js.is_empty() {
                        bail!("sweep needs --betas/--Js (or --beta/--J)");
                    }
                    if self.betas.len() * self.js.len() > MAX_GRID_POINTS {
                        bail!("grid has more than {MAX_GRID_POINTS} points");
                    }
                    if let Some(x) = self.betas.iter().chain(&self.js).find(|x| x.is_nan() || **x <= 0.0) {
                        bail!("grid values must be positive (got {x})");
                    }
                } else {
                    if self.beta.is_none() || self.j.is_none() {
                        bail!("the ising model needs --beta and --J");
                    }
                    if self.branch.is_none() && self.boundary.is_none() {
                        return Err(anyhow!(MissingBranch));
                    }
                }
            }
            ModelKind::CustomAmplitude if self.amplitude.is_none() => {
                bail!("custom_amplitude needs --amplitude <file>");
            }
            _ => {}
        }
        if self.command == "sweep" && self.model != ModelKind::Ising {
            bail!("sweep runs over the ising parameter grid only");
        }
        if let Some(b) = &self.boundary {
            if b.len() != self.d || b.iter().any(|x| x.is_nan() || *x <= 0.0) {
                bail!("--boundary needs {} positive diagonal entries", self.d);
            }
        }
        Ok(())
    }
}

/// Marker so the caller can print usage text for a missing branch.
#[derive(Debug)]
pub struct MissingBranch;

impl std::fmt::Display for MissingBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("the ising model needs --branch (h1, h2 or h_alpha)")
    }
}

impl std::error::Error for MissingBranch {}

/// Amplitude file: `k = ..` and `d = ..` lines followed by the complex
/// entries of the `d^{k+1}`-square matrix as `re im` pairs, row-major.
/// `#` starts a comment.
pub fn read_amplitude(path: &FsPath) -> Result<(usize, usize, Vec<Complex64>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut k, mut d) = (None, None);
    let mut numbers = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let v: usize = value.trim().parse().with_context(|| format!("bad value in '{line}'"))?;
            match key.trim() {
                "k" => k = Some(v),
                "d" => d = Some(v),
                other => bail!("unknown key '{other}' in amplitude file"),
            }
            continue;
        }
        for tok in line.split_whitespace() {
            numbers.push(tok.parse::<f64>().with_context(|| format!("bad number '{tok}'"))?);
        }
    }
    let (k, d) = match (k, d) {
        (Some(k), Some(d)) => (k, d),
        _ => bail!("amplitude file must declare k and d"),
    };
    let dim = d.pow(k as u32 + 1);
    if numbers.len() != 2 * dim * dim {
        bail!(
            "amplitude file holds {} numbers, expected {} for a {dim}x{dim} complex matrix",
            numbers.len(),
            2 * dim * dim
        );
    }
    let entries = numbers.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
    Ok((k, d, entries))
}
