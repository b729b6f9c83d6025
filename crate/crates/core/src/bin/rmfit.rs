use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rmfit::cli::compare::{compare_runs, CompareTolerances, RunData, DEFAULT_SIGMA_RATIO, DEFAULT_TOL_H1};
use rmfit::cli::output::write_json;
use rmfit::cli::{
    resolve_out_dir, run_bvp, run_rm, run_spectrum, run_sweep, CliError, ExperimentConfig, Overrides, SpectrumAt, Sweep,
};

#[derive(Parser)]
#[command(
    name = "rmfit",
    version,
    about = "Best-fit Gaussian means by truncated Robbins-Monro"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory [default: output.dir, then $RMFIT_OUT_DIR, then ./rmfit-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace problem.n_interior.
    #[arg(long)]
    n_interior: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run truncated Robbins-Monro.
    Run {
        #[command(flatten)]
        common: Common,
        /// Replace rm.n_iters.
        #[arg(long)]
        iters: Option<usize>,
        /// Replace rm.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fan out over `seeds=K` and/or `grid=N1,N2,...`; repeatable.
        #[arg(long, value_name = "KEY=VALUE")]
        sweep: Vec<String>,
    },
    /// Solve the boundary value problem by Newton's method.
    Bvp {
        #[command(flatten)]
        common: Common,
    },
    /// Low spectrum of the second variation.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// bvp, zero, or file:<path.csv>.
        #[arg(long, default_value = "bvp")]
        at: SpectrumAt,
    },
    /// Compare final mean paths of two runs (files, run dirs or sweep dirs).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL_H1)]
        tol_h1: f64,
        #[arg(long)]
        tol_l2: Option<f64>,
        /// Largest allowed ratio of truncation counts; 0 disables the check.
        #[arg(long, default_value_t = DEFAULT_SIGMA_RATIO)]
        tol_sigma_ratio: f64,
        /// Where to write compare.json [default: $RMFIT_OUT_DIR, then ./rmfit-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common, overrides: Overrides) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let config = ExperimentConfig::load(&common.config)?;
    let config = Overrides {
        n_interior: common.n_interior,
        ..overrides
    }
    .apply(&config)?;
    let out = resolve_out_dir(common.out.as_deref(), &config);
    Ok((config, out))
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run {
            common,
            iters,
            seed,
            sweep,
        } => {
            let (config, out) = load(
                &common,
                Overrides {
                    n_iters: iters,
                    seed,
                    n_interior: None,
                },
            )?;
            if sweep.is_empty() {
                let s = run_rm(&config, &out)?;
                match s.final_x {
                    Some(x) => println!("x = {x:.6}  sigma = {}  ({})", s.sigma_total, out.display()),
                    None => println!(
                        "|x|_H1 = {:.6}  sigma = {}  ({})",
                        s.final_norm,
                        s.sigma_total,
                        out.display()
                    ),
                }
                if let Some(d) = s.bvp.and_then(|b| b.rm_h1_distance) {
                    println!("H1 distance to BVP solution = {d:.6}");
                }
                return Ok(0);
            }
            let mut spec = Sweep::default();
            for item in &sweep {
                spec.add(item).map_err(|message| CliError::Config {
                    field: "--sweep".into(),
                    message,
                })?;
            }
            let summary = run_sweep(&config, &spec, &out)?;
            for r in &summary.runs {
                match &r.error {
                    Some(e) => eprintln!("{}: {e}", r.dir.display()),
                    None => println!(
                        "{}: norm = {:.6} sigma = {}",
                        r.dir.display(),
                        r.final_norm.unwrap_or(f64::NAN),
                        r.sigma_total.unwrap_or(0)
                    ),
                }
            }
            for c in &summary.grid_comparisons {
                println!(
                    "{} vs {}: H1 = {:.6}, sigma ratio = {:?}, {}",
                    c.a,
                    c.b,
                    c.h1_distance,
                    c.sigma_ratio,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            Ok(summary.exit_code)
        }
        Command::Bvp { common } => {
            let (config, out) = load(&common, Overrides::default())?;
            let r = run_bvp(&config, &out)?;
            println!(
                "converged in {} Newton steps, residual {:e}, min eigenvalue {:.6}",
                r.solution.newton_iters, r.solution.residual_h1, r.convexity.min_eig
            );
            Ok(0)
        }
        Command::Spectrum { common, at } => {
            let (config, out) = load(&common, Overrides::default())?;
            let s = run_spectrum(&config, &at, &out)?;
            for (i, e) in s.eigenvalues.iter().enumerate() {
                println!("{} {e:.10e}", i + 1);
            }
            println!(
                "min q = {:.6}, theta bound = {:.6}",
                s.convexity.min_q, s.convexity.theta_bound
            );
            Ok(0)
        }
        Command::Compare {
            a,
            b,
            tol_h1,
            tol_l2,
            tol_sigma_ratio,
            out,
        } => {
            let tol = CompareTolerances {
                h1: tol_h1,
                l2: tol_l2,
                sigma_ratio: (tol_sigma_ratio > 0.0).then_some(tol_sigma_ratio),
            };
            let report = compare_runs(&RunData::load(&a)?, &RunData::load(&b)?, tol)?;
            let dir = out.unwrap_or_else(|| {
                std::env::var_os(rmfit::cli::OUT_DIR_ENV)
                    .filter(|d| !d.is_empty())
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(rmfit::cli::experiment::DEFAULT_OUT_DIR))
            });
            write_json(&Path::new(&dir).join("compare.json"), &report)?;
            println!(
                "H1 = {:.6e}  L2 = {:.6e}  sigma = {:?} vs {:?}  {}",
                report.h1_distance,
                report.l2_distance,
                report.sigma_a,
                report.sigma_b,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(if report.pass { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("rmfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
