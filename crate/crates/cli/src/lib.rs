//! Scenario runner behind the `jmlab` binary.
//!
//! A scenario file names one of the kinds in [`config::Kind`]; [`run_path`] validates it,
//! runs it and writes CSV tables, `summary.json` and `report.txt` into the output directory.

pub mod config;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};

use jmlab_core::io::{json_string, write_atomic};
use serde_json::{json, Value};

use config::{Diagnostic, Overrides, Scenario};
use scenarios::{RunError, RunOutput};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Invalid(Vec<Diagnostic>),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            Failure::Invalid(d) => d.iter().map(|d| d.to_string()).collect(),
            Failure::Numerical(m) | Failure::Io(m) => vec![m.clone()],
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Invalid(m) => Failure::Invalid(vec![Diagnostic { key: "<run>".into(), message: m }]),
            RunError::Numerical(m) => Failure::Numerical(m),
            RunError::Io(m) => Failure::Io(m),
        }
    }
}

pub fn load(path: &Path, ov: &Overrides) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    config::parse_scenario(&text, ov).map_err(Failure::Invalid)
}

/// `--output-dir`, then `OUTPUT_DIR`, then the config's `output_dir`, then `output/<name>`.
pub fn output_dir(s: &Scenario, flag: Option<&Path>, env: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e);
    }
    s.output_dir.clone().unwrap_or_else(|| Path::new("output").join(&s.name))
}

pub fn write_outputs(s: &Scenario, out: &RunOutput, dir: &Path) -> Result<(), Failure> {
    let io = |e: jmlab_core::Error| Failure::Io(e.to_string());
    for (name, body) in &out.files {
        write_atomic(&dir.join(name), body.as_bytes()).map_err(io)?;
    }
    let summary = json!({
        "name": s.name,
        "kind": s.kind.as_str(),
        "seed": s.seed,
        "status": if out.failure.is_some() { "failed" } else { "ok" },
        "failure": out.failure.clone().map(Value::from).unwrap_or(Value::Null),
        "files": out.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "results": Value::Object(out.results.clone()),
    });
    write_atomic(&dir.join("summary.json"), json_string(&summary).map_err(io)?.as_bytes()).map_err(io)?;
    let mut report = format!("{} ({}), seed {}\n", s.name, s.kind.as_str(), s.seed);
    for line in &out.report {
        report.push_str(line);
        report.push('\n');
    }
    if let Some(f) = &out.failure {
        report.push_str(&format!("FAILED: {f}\n"));
    }
    write_atomic(&dir.join("report.txt"), report.as_bytes()).map_err(io)?;
    Ok(())
}

/// Run a validated scenario with `jobs` worker threads and write its artifacts to `dir`.
pub fn execute(s: &Scenario, dir: &Path, jobs: usize) -> Result<RunOutput, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::Io(format!("thread pool: {e}")))?;
    let out = pool.install(|| scenarios::run(s))?;
    write_outputs(s, &out, dir)?;
    match &out.failure {
        Some(f) => Err(Failure::Numerical(f.clone())),
        None => Ok(out),
    }
}

/// The text printed by `jmlab list`.
pub fn list_text() -> String {
    let mut s = String::from("scenario kinds:\n");
    for k in config::Kind::ALL {
        s.push_str(&format!("\n{}: {}\n", k.as_str(), k.summary()));
        for d in config::schema(k) {
            s.push_str(&format!("  {:<28} {:<11} {:<12} {}\n", d.key, d.ty, d.default.as_deref().unwrap_or("required"), d.doc));
        }
        if let Some(dim) = k.potential_dim() {
            s.push_str(&format!("  [potential] table, default kind = \"kepler\" with dim = {dim}\n"));
        }
    }
    s.push_str("\npotential kinds ([potential] table):\n");
    for (name, docs) in config::potential_schema() {
        s.push_str(&format!("\n{name}:\n"));
        for d in docs {
            s.push_str(&format!("  {:<28} {:<11} {:<12} {}\n", d.key, d.ty, d.default.as_deref().unwrap_or("required"), d.doc));
        }
    }
    s
}
