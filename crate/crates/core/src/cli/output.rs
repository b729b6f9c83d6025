//! File formats.
//!
//! CSV files are UTF-8 with LF line endings. Floats are written with 17
//! significant digits, enough to round-trip every `f64`. A file may open with
//! `# key=value` metadata lines ahead of the header row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::function_space::PathVector;
use crate::objective::{ProblemSpec, State};
use crate::rm_engine::TraceRecord;

pub const TRACE_HEADER: &str = "n,sigma,a,truncated,norm_x,kl_estimate";
pub const PATH_HEADER: &str = "t,x,m0,mean";
pub const SPECTRUM_HEADER: &str = "index,eigenvalue";

pub type Metadata = Vec<(String, String)>;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn start(meta: &Metadata, header: &str) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        debug_assert!(!k.contains('=') && !v.contains('\n'));
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(header);
    out.push('\n');
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn trace_csv(records: &[TraceRecord], meta: &Metadata) -> String {
    let mut out = start(meta, TRACE_HEADER);
    for r in records {
        let kl = r.kl.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            r.sigma,
            fmt_f64(r.a),
            u8::from(r.truncated),
            fmt_f64(r.norm_x),
            kl
        );
    }
    out
}

/// Rows `t, x, m0, m0 + x` over the closed interval. At the boundary nodes
/// `x = 0` and `m0` takes its boundary values.
pub fn path_csv(spec: &ProblemSpec, x: &PathVector, meta: &Metadata) -> String {
    let (m_minus, m_plus) = spec.boundary().unwrap_or((0.0, 0.0));
    let m0 = spec.m0().unwrap_or(&[]);
    let grid = x.grid();
    let mut out = start(meta, PATH_HEADER);
    let mut row = |t: f64, xv: f64, m: f64| {
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(t), fmt_f64(xv), fmt_f64(m), fmt_f64(m + xv));
    };
    row(0.0, 0.0, m_minus);
    for (i, (&xv, &m)) in x.values().iter().zip(m0).enumerate() {
        row(grid.node(i), xv, m);
    }
    row(1.0, 0.0, m_plus);
    out
}

/// Long-format iterate snapshots: `n,t,x` for paths, `n,x` for scalars.
pub fn snapshots_csv(snapshots: &[(usize, State)]) -> String {
    let path_mode = matches!(snapshots.first(), Some((_, State::Path(_))));
    let mut out = String::from(if path_mode { "n,t,x\n" } else { "n,x\n" });
    for (n, state) in snapshots {
        match state {
            State::Scalar(s) => {
                let _ = writeln!(out, "{n},{}", fmt_f64(s.value()));
            }
            State::Path(p) => {
                let grid = p.grid();
                for (i, v) in p.values().iter().enumerate() {
                    let _ = writeln!(out, "{n},{},{}", fmt_f64(grid.node(i)), fmt_f64(*v));
                }
            }
        }
    }
    out
}

pub fn spectrum_csv(eigenvalues: &[f64], meta: &Metadata) -> String {
    let mut out = start(meta, SPECTRUM_HEADER);
    for (i, e) in eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_f64(*e));
    }
    out
}

/// A parsed path CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFile {
    pub source: PathBuf,
    pub meta: BTreeMap<String, String>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub m0: Vec<f64>,
    pub mean: Vec<f64>,
}

pub fn read_path_csv(path: &Path) -> Result<PathFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_path_csv(&text, path)
}

pub fn parse_path_csv(text: &str, source: &Path) -> Result<PathFile, CliError> {
    let bad = |message: String| CliError::Format {
        path: source.to_path_buf(),
        message,
    };
    let mut meta = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut header = None;
    for (_, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            header = Some(line);
            break;
        }
    }
    if header.map(str::trim) != Some(PATH_HEADER) {
        return Err(bad(format!("expected header `{PATH_HEADER}`")));
    }
    let mut file = PathFile {
        source: source.to_path_buf(),
        meta,
        t: Vec::new(),
        x: Vec::new(),
        m0: Vec::new(),
        mean: Vec::new(),
    };
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        if fields.len() != 4 {
            return Err(bad(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        file.t.push(fields[0]);
        file.x.push(fields[1]);
        file.m0.push(fields[2]);
        file.mean.push(fields[3]);
    }
    if file.t.len() < 2 {
        return Err(bad("needs at least the two boundary rows".into()));
    }
    if file.t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(bad("t must be strictly increasing".into()));
    }
    if file.t[0] != 0.0 || file.t[file.t.len() - 1] != 1.0 {
        return Err(bad("rows must span t = 0 to t = 1".into()));
    }
    Ok(file)
}
