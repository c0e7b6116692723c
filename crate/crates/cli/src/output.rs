use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ModelSpec;

pub const VERSION: &str = concat!("qms ", env!("CARGO_PKG_VERSION"));

/// `# key: value` lines opening every CSV file.
pub fn metadata(spec: &ModelSpec) -> Vec<(String, String)> {
    vec![
        ("version".into(), VERSION.into()),
        (
            "config".into(),
            serde_json::to_string(spec).expect("config serializes"),
        ),
        ("unit".into(), if spec.bits { "bits" } else { "nats" }.into()),
    ]
}

/// Creates the output directory and a buffered file inside it.
pub fn create(spec: &ModelSpec, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&spec.out_dir).with_context(|| format!("creating {}", spec.out_dir.display()))?;
    let path = spec.out_dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    config: &'a ModelSpec,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(spec: &ModelSpec, name: &str, body: &T) -> Result<PathBuf> {
    let (path, mut out) = create(spec, name)?;
    let env = Envelope {
        version: VERSION,
        config: spec,
        body,
    };
    serde_json::to_writer_pretty(&mut out, &env)?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
