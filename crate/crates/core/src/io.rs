//! Flat-file emission: CSV tables with round-trip exact numbers and JSON summaries.
//!
//! Every writer goes through [`write_atomic`], so a reader never sees a partial file.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jm_metric::{ParamKind, SampledPath};
use crate::potentials::Configuration;
use crate::sector_optics::SweepRow;
use crate::variational::TimedPath;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Write `bytes` to a sibling temporary file, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::param("path", format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn table(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn coord_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |k| format!("{prefix}{k}"))
}

/// `param,q0,q1,...`
pub fn path_csv(path: &SampledPath) -> Result<String> {
    let header: Vec<String> = std::iter::once("param".to_string())
        .chain(coord_header("q", path.dim()))
        .collect();
    table(
        &header,
        path.params().iter().zip(path.points()).map(|(t, q)| {
            std::iter::once(fmt_f64(*t))
                .chain(q.iter().map(|x| fmt_f64(*x)))
                .collect()
        }),
    )
}

/// `t,q0,...,v0,...`
pub fn timed_path_csv(path: &TimedPath) -> Result<String> {
    let dim = path.path().dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(coord_header("q", dim))
        .chain(coord_header("v", dim))
        .collect();
    table(
        &header,
        path.times()
            .iter()
            .zip(path.points())
            .zip(path.velocities())
            .map(|((t, q), v)| {
                std::iter::once(fmt_f64(*t))
                    .chain(q.iter().map(|x| fmt_f64(*x)))
                    .chain(v.iter().map(|x| fmt_f64(*x)))
                    .collect()
            }),
    )
}

/// Parse a table written by [`path_csv`].
pub fn parse_path_csv(text: &str, kind: ParamKind) -> Result<SampledPath> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut params = Vec::new();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidPath(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let (t, q) = vals
            .split_first()
            .ok_or_else(|| Error::InvalidPath("empty row".into()))?;
        params.push(*t);
        points.push(Configuration::from(q.to_vec()));
    }
    SampledPath::new(points, params, kind)
}

pub fn read_path_csv(path: &Path, kind: ParamKind) -> Result<SampledPath> {
    parse_path_csv(&fs::read_to_string(path)?, kind)
}

pub fn write_path_csv(file: &Path, path: &SampledPath) -> Result<()> {
    write_atomic(file, path_csv(path)?.as_bytes())
}

pub fn write_timed_path_csv(file: &Path, path: &TimedPath) -> Result<()> {
    write_atomic(file, timed_path_csv(path)?.as_bytes())
}

/// `x,y` rows of a flattened-plane polyline.
pub fn planar_csv(points: &[[f64; 2]]) -> Result<String> {
    table(
        &["x".to_string(), "y".to_string()],
        points.iter().map(|p| vec![fmt_f64(p[0]), fmt_f64(p[1])]),
    )
}

/// A header plus rows of numbers.
pub fn numeric_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    table(&header, rows.iter().map(|r| r.iter().map(|x| fmt_f64(*x)).collect()))
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "m",
    "M",
    "delta",
    "alpha",
    "convention",
    "psi1",
    "psi2",
    "Mc",
    "condition_holds",
    "x_star",
    "S_min",
    "oracle_len",
    "oracle_hits_vertex",
    "classification",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let header: Vec<String> = SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    table(
        &header,
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.m),
                fmt_f64(r.m_big),
                fmt_f64(r.delta),
                fmt_f64(r.alpha),
                r.convention.as_str().to_string(),
                fmt_f64(r.psi1),
                fmt_f64(r.psi2),
                fmt_f64(r.mc),
                r.condition_holds.to_string(),
                fmt_f64(r.x_star),
                fmt_f64(r.s_min),
                fmt_opt(r.oracle_len),
                r.oracle_hits_vertex.map(|b| b.to_string()).unwrap_or_default(),
                r.classification.as_str().to_string(),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline.
pub fn json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(file: &Path, value: &T) -> Result<()> {
    write_atomic(file, json_string(value)?.as_bytes())
}
