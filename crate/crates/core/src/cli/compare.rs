//! Distances between final mean paths of two runs.
//!
//! A run is a path CSV, a run directory holding `path.csv` (or `bvp.csv`), or
//! a sweep directory whose subdirectories hold `path.csv`. A sweep is reduced
//! to its member-averaged mean path and mean truncation count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::output::{read_path_csv, PathFile};
use super::CliError;

pub const DEFAULT_TOL_H1: f64 = 0.5;
pub const DEFAULT_SIGMA_RATIO: f64 = 2.0;

/// Metadata keys that must agree between compared runs.
const NUMERIC_KEYS: [&str; 3] = ["epsilon", "m_minus", "m_plus"];
const TEXT_KEYS: [&str; 2] = ["mode", "potential"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub label: String,
    pub meta: BTreeMap<String, String>,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub members: usize,
    /// Truncation count, averaged over members for sweeps.
    pub sigma: Option<f64>,
}

fn sigma_of(file: &PathFile) -> Result<Option<f64>, CliError> {
    match file.meta.get("sigma_total") {
        None => Ok(None),
        Some(s) => s
            .parse::<usize>()
            .map(|v| Some(v as f64))
            .map_err(|e| CliError::Format {
                path: file.source.clone(),
                message: format!("sigma_total: {e}"),
            }),
    }
}

impl RunData {
    pub fn from_file(file: PathFile) -> Result<Self, CliError> {
        let sigma = sigma_of(&file)?;
        Ok(Self {
            label: file.source.display().to_string(),
            meta: file.meta,
            t: file.t,
            mean: file.mean,
            members: 1,
            sigma,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.is_dir() {
            return Self::from_file(read_path_csv(path)?);
        }
        for name in ["path.csv", "bvp.csv"] {
            let candidate = path.join(name);
            if candidate.is_file() {
                return Self::from_file(read_path_csv(&candidate)?);
            }
        }
        let mut members: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path().join("path.csv")))
            .filter(|p| p.is_file())
            .collect();
        members.sort();
        if members.is_empty() {
            return Err(CliError::io(path, "no path.csv in the directory or its subdirectories"));
        }
        let files = members
            .iter()
            .map(|p| read_path_csv(p))
            .collect::<Result<Vec<_>, _>>()?;
        let first = &files[0];
        let mut mean = vec![0.0; first.t.len()];
        let mut sigma_sum = Some(0.0);
        for f in &files {
            if f.t != first.t {
                return Err(CliError::Format {
                    path: f.source.clone(),
                    message: "sweep members must share one grid".into(),
                });
            }
            check_compatible(&first.meta, &f.meta)?;
            for (m, v) in mean.iter_mut().zip(&f.mean) {
                *m += v;
            }
            sigma_sum = match (sigma_sum, sigma_of(f)?) {
                (Some(acc), Some(s)) => Some(acc + s),
                _ => None,
            };
        }
        let k = files.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        Ok(Self {
            label: path.display().to_string(),
            meta: first.meta.clone(),
            t: first.t.clone(),
            mean,
            members: files.len(),
            sigma: sigma_sum.map(|s| s / k),
        })
    }

    /// Piecewise-linear evaluation of the mean path.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.t.partition_point(|&s| s <= t);
        if i == 0 {
            return self.mean[0];
        }
        if i == self.t.len() {
            return self.mean[i - 1];
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (t - t0) / (t1 - t0);
        self.mean[i - 1] * (1.0 - w) + self.mean[i] * w
    }
}

fn check_compatible(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Result<(), CliError> {
    let mismatch = |key: &str, l: &str, r: &str| CliError::Incompatible {
        field: key.to_string(),
        left: l.to_string(),
        right: r.to_string(),
    };
    for key in TEXT_KEYS {
        if let (Some(l), Some(r)) = (a.get(key), b.get(key)) {
            if l != r {
                return Err(mismatch(key, l, r));
            }
        }
    }
    for key in NUMERIC_KEYS {
        if let (Some(l), Some(r)) = (a.get(key), b.get(key)) {
            match (l.parse::<f64>(), r.parse::<f64>()) {
                (Ok(x), Ok(y)) if x == y => {}
                _ => return Err(mismatch(key, l, r)),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareTolerances {
    pub h1: f64,
    pub l2: Option<f64>,
    /// Largest allowed ratio of truncation counts; checked only when both
    /// runs carry one.
    pub sigma_ratio: Option<f64>,
}

impl Default for CompareTolerances {
    fn default() -> Self {
        Self {
            h1: DEFAULT_TOL_H1,
            l2: None,
            sigma_ratio: Some(DEFAULT_SIGMA_RATIO),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub a: String,
    pub b: String,
    pub members_a: usize,
    pub members_b: usize,
    /// Nodes of the finer grid the paths were compared on.
    pub n_points: usize,
    pub h1_distance: f64,
    pub l2_distance: f64,
    pub sigma_a: Option<f64>,
    pub sigma_b: Option<f64>,
    /// `max / min` of the truncation counts; `None` if either is missing or
    /// only one is zero.
    pub sigma_ratio: Option<f64>,
    pub tolerances: CompareTolerances,
    pub h1_pass: bool,
    pub l2_pass: Option<bool>,
    pub sigma_pass: Option<bool>,
    pub pass: bool,
}

/// Discrete `H¹` seminorm and trapezoidal `L²` norm of `d` sampled at `t`.
fn norms(t: &[f64], d: &[f64]) -> (f64, f64) {
    let mut h1 = 0.0;
    let mut l2 = 0.0;
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        h1 += (d[i + 1] - d[i]).powi(2) / h;
        l2 += 0.5 * (d[i] * d[i] + d[i + 1] * d[i + 1]) * h;
    }
    (h1.sqrt(), l2.sqrt())
}

pub fn compare_runs(a: &RunData, b: &RunData, tol: CompareTolerances) -> Result<CompareReport, CliError> {
    check_compatible(&a.meta, &b.meta)?;
    let nodes = if a.t.len() >= b.t.len() { &a.t } else { &b.t };
    let diff: Vec<f64> = nodes.iter().map(|&t| a.eval(t) - b.eval(t)).collect();
    let (h1_distance, l2_distance) = norms(nodes, &diff);

    let sigma_ratio = match (a.sigma, b.sigma) {
        (Some(x), Some(y)) => {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            if hi == 0.0 {
                Some(1.0)
            } else if lo == 0.0 {
                None
            } else {
                Some(hi / lo)
            }
        }
        _ => None,
    };
    let h1_pass = h1_distance <= tol.h1;
    let l2_pass = tol.l2.map(|r| l2_distance <= r);
    let both_sigma = a.sigma.is_some() && b.sigma.is_some();
    let sigma_pass = match tol.sigma_ratio {
        Some(r) if both_sigma => Some(sigma_ratio.is_some_and(|q| q <= r)),
        _ => None,
    };
    let pass = h1_pass && l2_pass.unwrap_or(true) && sigma_pass.unwrap_or(true);
    Ok(CompareReport {
        a: a.label.clone(),
        b: b.label.clone(),
        members_a: a.members,
        members_b: b.members,
        n_points: nodes.len(),
        h1_distance,
        l2_distance,
        sigma_a: a.sigma,
        sigma_b: b.sigma,
        sigma_ratio,
        tolerances: tol,
        h1_pass,
        l2_pass,
        sigma_pass,
        pass,
    })
}
