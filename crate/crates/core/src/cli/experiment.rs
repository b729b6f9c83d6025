//! The `run`, `bvp` and `spectrum` pipelines and seed/grid sweeps.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use super::compare::{compare_runs, CompareTolerances, RunData};
use super::config::{ExperimentConfig, Mode, OutputFormat};
use super::output::{self, fmt_f64, Metadata};
use super::CliError;
use crate::function_space::{norm_h1, norm_l2, PathVector};
use crate::gaussian::worker_seed;
use crate::objective::{ProblemSpec, State};
use crate::oracles::{bvp_solve, convexity_check, schrodinger_eigs, BvpSolution, ConvexityReport};
use crate::rm_engine::rm_run;

/// Environment variable naming the output directory used when neither
/// `--out` nor the config's `output.dir` is given.
pub const OUT_DIR_ENV: &str = "RMFIT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "rmfit-out";

pub fn resolve_out_dir(cli: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = cli {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.output.dir {
        return dir.clone();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

/// Command-line replacements for config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n_iters: Option<usize>,
    pub seed: Option<u64>,
    pub n_interior: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        let mut c = config.clone();
        if let Some(rm) = c.rm.as_mut() {
            if let Some(n) = self.n_iters {
                rm.n_iters = n;
            }
            if let Some(s) = self.seed {
                rm.seed = s;
            }
        }
        if let Some(n) = self.n_interior {
            c.problem.n_interior = Some(n);
        }
        c.validate()?;
        Ok(c)
    }
}

fn problem_metadata(config: &ExperimentConfig, spec: &ProblemSpec) -> Metadata {
    let p = &config.problem;
    let mode = match p.mode {
        Mode::Scalar => "scalar",
        Mode::Path => "path",
    };
    let mut meta = vec![
        ("mode".to_string(), mode.to_string()),
        ("potential".to_string(), spec.potential().name().to_string()),
        ("epsilon".to_string(), fmt_f64(spec.epsilon())),
    ];
    if let (Some(grid), Some((lo, hi))) = (spec.grid(), spec.boundary()) {
        meta.push(("n_interior".to_string(), grid.n_interior().to_string()));
        meta.push(("m_minus".to_string(), fmt_f64(lo)));
        meta.push(("m_plus".to_string(), fmt_f64(hi)));
    }
    meta
}

fn with(meta: &Metadata, extra: &[(&str, String)]) -> Metadata {
    let mut m = meta.clone();
    m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvpSummary {
    pub converged: bool,
    pub residual_h1: f64,
    pub newton_iters: usize,
    pub norm_h1: f64,
    /// Distances from the RM final state, when run alongside one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rm_h1_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rm_l2_distance: Option<f64>,
}

impl BvpSummary {
    fn new(sol: &BvpSolution) -> Self {
        Self {
            converged: sol.converged,
            residual_h1: sol.residual_h1,
            newton_iters: sol.newton_iters,
            norm_h1: norm_h1(&sol.x_star),
            rm_h1_distance: None,
            rm_l2_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub rm_seconds: Option<f64>,
    pub bvp_seconds: Option<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub iterations: usize,
    /// `|x|` for scalar runs, `‖x‖_{H¹}` for path runs.
    pub final_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_x: Option<f64>,
    pub sigma_total: usize,
    pub non_finite_truncations: usize,
    /// Last relative-entropy estimate, up to an additive constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kl_up_to_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bvp: Option<BvpSummary>,
    pub timings: Timings,
    pub config: ExperimentConfig,
}

fn solve_bvp(config: &ExperimentConfig, spec: &ProblemSpec) -> Result<BvpSolution, CliError> {
    let init = config.bvp_initial_guess(spec)?;
    Ok(bvp_solve(spec, &init, config.oracle.tol, config.oracle.max_iters)?)
}

fn not_converged(sol: &BvpSolution) -> CliError {
    CliError::NotConverged {
        residual: sol.residual_h1,
        iterations: sol.newton_iters,
    }
}

fn write_bvp_path(
    out: &Path,
    config: &ExperimentConfig,
    spec: &ProblemSpec,
    sol: &BvpSolution,
) -> Result<(), CliError> {
    if config.output.wants(OutputFormat::Path) {
        let meta = with(
            &problem_metadata(config, spec),
            &[
                ("kind", "bvp".to_string()),
                ("converged", sol.converged.to_string()),
                ("residual_h1", fmt_f64(sol.residual_h1)),
            ],
        );
        output::write_text(&out.join("bvp.csv"), &output::path_csv(spec, &sol.x_star, &meta))?;
    }
    Ok(())
}

/// One truncated Robbins–Monro run, optionally followed by the boundary
/// value solve it is checked against.
pub fn run_rm(config: &ExperimentConfig, out: &Path) -> Result<RunSummary, CliError> {
    config.validate()?;
    let started = Instant::now();
    let spec = config.problem_spec()?;
    let rm = config.rm.as_ref().expect("validated");
    let policy = config.policy(&spec)?;
    let schedule = config.schedule()?;
    let x0 = config.x0(&spec)?;
    let options = config.trace_options()?;
    let mut sampler = spec.sampler(rm.seed);

    let trace = rm_run(&spec, &policy, &schedule, &x0, &mut sampler, rm.n_iters, &options).map_err(|e| match e {
        crate::Error::TruncationStorm { sigma, iterations } => CliError::TruncationStorm { sigma, iterations },
        other => CliError::Core(other),
    })?;

    let meta = with(
        &problem_metadata(config, &spec),
        &[
            ("kind", "rm".to_string()),
            ("seed", rm.seed.to_string()),
            ("iterations", trace.iterations.to_string()),
            ("sigma_total", trace.total_truncations.to_string()),
        ],
    );
    if config.output.wants(OutputFormat::Trace) {
        output::write_text(&out.join("trace.csv"), &output::trace_csv(&trace.records, &meta))?;
    }
    if config.output.wants(OutputFormat::Path) {
        if let State::Path(x) = &trace.final_state {
            output::write_text(&out.join("path.csv"), &output::path_csv(&spec, x, &meta))?;
        }
        if !trace.snapshots.is_empty() {
            output::write_text(&out.join("snapshots.csv"), &output::snapshots_csv(&trace.snapshots))?;
        }
    }

    let mut bvp = None;
    let mut bvp_seconds = None;
    let mut failure = None;
    if config.oracle.compare_bvp {
        let t = Instant::now();
        let sol = solve_bvp(config, &spec)?;
        bvp_seconds = Some(t.elapsed().as_secs_f64());
        write_bvp_path(out, config, &spec, &sol)?;
        let diff = trace
            .final_state
            .as_path()
            .expect("compare_bvp requires a path problem")
            .add_scaled(-1.0, &sol.x_star)?;
        let mut summary = BvpSummary::new(&sol);
        summary.rm_h1_distance = Some(norm_h1(&diff));
        summary.rm_l2_distance = Some(norm_l2(&diff));
        if !sol.converged {
            failure = Some(not_converged(&sol));
        }
        bvp = Some(summary);
    }

    let summary = RunSummary {
        seed: rm.seed,
        iterations: trace.iterations,
        final_norm: trace.final_state.norm(),
        final_x: trace.final_state.as_scalar(),
        sigma_total: trace.total_truncations,
        non_finite_truncations: trace.non_finite_truncations,
        final_kl_up_to_constant: trace.records.iter().rev().find_map(|r| r.kl),
        bvp,
        timings: Timings {
            rm_seconds: Some(trace.wall_time.as_secs_f64()),
            bvp_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
        config: config.clone(),
    };
    if config.output.wants(OutputFormat::Summary) {
        output::write_json(&out.join("summary.json"), &summary)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvpReport {
    #[serde(flatten)]
    pub solution: BvpSummary,
    pub eigenvalues: Vec<f64>,
    pub convexity: ConvexityReport,
    pub seconds: f64,
    pub config: ExperimentConfig,
}

/// Newton solve of the boundary value problem plus the spectrum at its
/// solution. Files are written even when Newton fails to converge.
pub fn run_bvp(config: &ExperimentConfig, out: &Path) -> Result<BvpReport, CliError> {
    config.validate()?;
    let started = Instant::now();
    let spec = config.problem_spec()?;
    let sol = solve_bvp(config, &spec)?;
    write_bvp_path(out, config, &spec, &sol)?;
    let spectrum = schrodinger_eigs(&spec, &sol.x_star, config.oracle.spectrum_k)?;
    let convexity = convexity_check(&spec, &sol.x_star)?;
    if config.output.wants(OutputFormat::Spectrum) {
        let meta = with(&problem_metadata(config, &spec), &[("at", "bvp".to_string())]);
        output::write_text(
            &out.join("spectrum.csv"),
            &output::spectrum_csv(&spectrum.eigenvalues, &meta),
        )?;
    }
    let report = BvpReport {
        solution: BvpSummary::new(&sol),
        eigenvalues: spectrum.eigenvalues,
        convexity,
        seconds: started.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    if config.output.wants(OutputFormat::Summary) {
        output::write_json(&out.join("bvp_summary.json"), &report)?;
    }
    if sol.converged {
        Ok(report)
    } else {
        Err(not_converged(&sol))
    }
}

/// Where `spectrum` linearizes the second variation.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumAt {
    Bvp,
    Zero,
    /// A path CSV whose `mean` column gives `m`; the state is `m - m0`.
    File(PathBuf),
}

impl FromStr for SpectrumAt {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bvp" => Ok(SpectrumAt::Bvp),
            "zero" => Ok(SpectrumAt::Zero),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(SpectrumAt::File(PathBuf::from(p))),
                _ => Err(format!("expected bvp, zero or file:<path>, got `{s}`")),
            },
        }
    }
}

impl SpectrumAt {
    fn label(&self) -> String {
        match self {
            SpectrumAt::Bvp => "bvp".into(),
            SpectrumAt::Zero => "zero".into(),
            SpectrumAt::File(p) => format!("file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub at: String,
    pub eigenvalues: Vec<f64>,
    pub state_norm_h1: f64,
    pub convexity: ConvexityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bvp: Option<BvpSummary>,
    pub config: ExperimentConfig,
}

fn state_from_file(spec: &ProblemSpec, path: &Path) -> Result<PathVector, CliError> {
    let grid = spec.grid().expect("path problem");
    let file = output::read_path_csv(path)?;
    let n = grid.n_interior();
    if file.t.len() != n + 2 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("expected {} rows for n_interior = {n}, got {}", n + 2, file.t.len()),
        });
    }
    let m0 = spec.m0().expect("path problem");
    let mut values = Vec::with_capacity(n);
    for (i, &m) in m0.iter().enumerate() {
        let t = file.t[i + 1];
        if (t - grid.node(i)).abs() > 1e-9 {
            return Err(CliError::Format {
                path: path.to_path_buf(),
                message: format!("row {} has t = {t}, grid node is {}", i + 2, grid.node(i)),
            });
        }
        values.push(file.mean[i + 1] - m);
    }
    Ok(PathVector::new(grid, values)?)
}

pub fn run_spectrum(config: &ExperimentConfig, at: &SpectrumAt, out: &Path) -> Result<SpectrumSummary, CliError> {
    config.validate()?;
    let spec = config.problem_spec()?;
    let grid = spec.grid().ok_or_else(|| CliError::Config {
        field: "problem.mode".into(),
        message: "the spectrum is defined for path problems".into(),
    })?;
    let mut bvp = None;
    let mut failure = None;
    let x = match at {
        SpectrumAt::Zero => PathVector::zeros(grid),
        SpectrumAt::File(p) => state_from_file(&spec, p)?,
        SpectrumAt::Bvp => {
            let sol = solve_bvp(config, &spec)?;
            write_bvp_path(out, config, &spec, &sol)?;
            if !sol.converged {
                failure = Some(not_converged(&sol));
            }
            bvp = Some(BvpSummary::new(&sol));
            sol.x_star
        }
    };
    let spectrum = schrodinger_eigs(&spec, &x, config.oracle.spectrum_k)?;
    let convexity = convexity_check(&spec, &x)?;
    if config.output.wants(OutputFormat::Spectrum) {
        let meta = with(&problem_metadata(config, &spec), &[("at", at.label())]);
        output::write_text(
            &out.join("spectrum.csv"),
            &output::spectrum_csv(&spectrum.eigenvalues, &meta),
        )?;
    }
    let summary = SpectrumSummary {
        at: at.label(),
        eigenvalues: spectrum.eigenvalues,
        state_norm_h1: spectrum.state_norm_h1,
        convexity,
        bvp,
        config: config.clone(),
    };
    if config.output.wants(OutputFormat::Summary) {
        output::write_json(&out.join("spectrum_summary.json"), &summary)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Seed and grid fan-out for `run`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sweep {
    /// Run seeds `seed, seed + 1, ..., seed + K - 1`.
    pub seeds: Option<usize>,
    /// Repeat for each interior grid size.
    pub grids: Vec<usize>,
}

impl Sweep {
    /// Folds one `key=value` item (`seeds=K` or `grid=N1,N2,...`) into the sweep.
    pub fn add(&mut self, item: &str) -> Result<(), String> {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("sweep item `{item}` is not key=value"))?;
        match key.trim() {
            "seeds" => {
                let k: usize = value.trim().parse().map_err(|e| format!("seeds: {e}"))?;
                if k == 0 {
                    return Err("seeds must be at least 1".into());
                }
                self.seeds = Some(k);
            }
            "grid" => {
                for n in value.split(',') {
                    let n: usize = n.trim().parse().map_err(|e| format!("grid: {e}"))?;
                    self.grids.push(n);
                }
            }
            other => return Err(format!("unknown sweep key `{other}` (expected seeds or grid)")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub dir: PathBuf,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_interior: Option<usize>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bvp_h1_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub runs: Vec<SweepEntry>,
    /// Comparison of the seed-averaged runs at each pair of adjacent grids.
    pub grid_comparisons: Vec<super::compare::CompareReport>,
    pub exit_code: i32,
}

/// Runs every (grid, seed) combination on worker threads, each into its own
/// subdirectory of `out`, and writes `sweep_summary.json`.
pub fn run_sweep(config: &ExperimentConfig, sweep: &Sweep, out: &Path) -> Result<SweepSummary, CliError> {
    config.validate()?;
    let base_seed = config.rm.as_ref().map(|r| r.seed).unwrap_or(0);
    let seeds = sweep.seeds.unwrap_or(1);
    let grids: Vec<Option<usize>> = if sweep.grids.is_empty() {
        vec![None]
    } else {
        if config.problem.mode != Mode::Path {
            return Err(CliError::Config {
                field: "--sweep grid".into(),
                message: "grid sweeps need a path problem".into(),
            });
        }
        sweep.grids.iter().map(|&n| Some(n)).collect()
    };

    let mut jobs = Vec::new();
    for &n in &grids {
        let grid_dir = match n {
            Some(n) => out.join(format!("n_{n}")),
            None => out.to_path_buf(),
        };
        for k in 0..seeds {
            let seed = worker_seed(base_seed, k as u64);
            let overrides = Overrides {
                seed: Some(seed),
                n_interior: n,
                n_iters: None,
            };
            let job_config = overrides.apply(config)?;
            jobs.push((grid_dir.join(format!("seed_{seed}")), seed, n, job_config));
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepEntry>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((dir, seed, n, job)) = jobs.get(i) else {
                    break;
                };
                let entry = match run_rm(job, dir) {
                    Ok(s) => SweepEntry {
                        dir: dir.clone(),
                        seed: *seed,
                        n_interior: *n,
                        exit_code: 0,
                        error: None,
                        final_norm: Some(s.final_norm),
                        sigma_total: Some(s.sigma_total),
                        bvp_h1_distance: s.bvp.and_then(|b| b.rm_h1_distance),
                    },
                    Err(e) => SweepEntry {
                        dir: dir.clone(),
                        seed: *seed,
                        n_interior: *n,
                        exit_code: e.exit_code(),
                        error: Some(e.to_string()),
                        final_norm: None,
                        sigma_total: None,
                        bvp_h1_distance: None,
                    },
                };
                results.lock().expect("no worker panics while holding the lock")[i] = Some(entry);
            });
        }
    });
    let runs: Vec<SweepEntry> = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|e| e.expect("every job ran"))
        .collect();
    let mut exit_code = runs.iter().map(|r| r.exit_code).max().unwrap_or(0);

    let mut grid_comparisons = Vec::new();
    if exit_code == 0 && grids.len() > 1 && config.output.wants(OutputFormat::Path) {
        let dirs: Vec<PathBuf> = grids.iter().flatten().map(|n| out.join(format!("n_{n}"))).collect();
        for pair in dirs.windows(2) {
            let a = RunData::load(&pair[0])?;
            let b = RunData::load(&pair[1])?;
            let report = compare_runs(&a, &b, CompareTolerances::default())?;
            if !report.pass {
                exit_code = 1;
            }
            grid_comparisons.push(report);
        }
    }
    let summary = SweepSummary {
        runs,
        grid_comparisons,
        exit_code,
    };
    output::write_json(&out.join("sweep_summary.json"), &summary)?;
    Ok(summary)
}
