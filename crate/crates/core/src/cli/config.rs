//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::function_space::{Grid, PathVector};
use crate::objective::{ProblemSpec, State};
use crate::oracles::{kink_initial_guess, DEFAULT_BVP_MAX_ITERS, DEFAULT_BVP_TOL};
use crate::potentials::Potential;
use crate::rm_engine::{KlCadence, PolicyKind, RegionShape, StepSchedule, TraceOptions, TrustRegionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Scalar,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    Quartic,
    DoubleWell,
}

impl PotentialName {
    pub fn potential(self) -> Potential {
        match self {
            PotentialName::Quartic => Potential::Quartic,
            PotentialName::DoubleWell => Potential::DoubleWell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mode: Mode,
    pub potential: PotentialName,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_interior: Option<usize>,
    #[serde(default)]
    pub m_minus: f64,
    #[serde(default)]
    pub m_plus: f64,
    /// Interior values of a reference mean replacing the linear interpolant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
}

/// A state given in the config: a number (scalar), `"zero"`, or the interior
/// values of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Scalar(f64),
    Named(NamedState),
    Path(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_a0")]
    pub a0: f64,
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_a0() -> f64 {
    1.0
}
fn default_n0() -> f64 {
    10.0
}
fn default_gamma() -> f64 {
    1.0
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            a0: default_a0(),
            n0: default_n0(),
            gamma: default_gamma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmConfig {
    pub policy: PolicyKind,
    pub region: RegionShape,
    pub restart: StateSpec,
    /// Starting state; defaults to the restart point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<StateSpec>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub n_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_state_every")]
    pub state_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlCadence>,
    #[serde(default = "default_sigma_cap")]
    pub sigma_cap: usize,
}

fn default_record_every() -> usize {
    1
}
fn default_state_every() -> Option<usize> {
    Some(100)
}
fn default_sigma_cap() -> usize {
    1_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// `m(t) = m₋ + (m₊ - m₋) tanh(t / width) / tanh(1 / width)`.
    Kink {
        width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_spectrum_k")]
    pub spectrum_k: usize,
    #[serde(default = "default_initial_guess")]
    pub initial_guess: InitialGuess,
    /// Also solve the boundary value problem after an RM run and report the
    /// distance to it.
    #[serde(default)]
    pub compare_bvp: bool,
}

fn default_tol() -> f64 {
    DEFAULT_BVP_TOL
}
fn default_max_iters() -> usize {
    DEFAULT_BVP_MAX_ITERS
}
fn default_spectrum_k() -> usize {
    10
}
fn default_initial_guess() -> InitialGuess {
    InitialGuess::Zero
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
            spectrum_k: default_spectrum_k(),
            initial_guess: default_initial_guess(),
            compare_bvp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Trace,
    Path,
    Spectrum,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![
        OutputFormat::Trace,
        OutputFormat::Path,
        OutputFormat::Spectrum,
        OutputFormat::Summary,
    ]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rm: Option<RmConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn field(name: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: name.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| field("<document>", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Checks every precondition the pipelines rely on.
    pub fn validate(&self) -> Result<(), CliError> {
        let spec = self.problem_spec()?;
        if let Some(rm) = &self.rm {
            if rm.n_iters == 0 {
                return Err(field("rm.n_iters", "must be at least 1"));
            }
            if rm.record_every == 0 {
                return Err(field("rm.record_every", "must be at least 1"));
            }
            if rm.state_every == Some(0) {
                return Err(field("rm.state_every", "must be at least 1 or null"));
            }
            if let Some(kl) = &rm.kl {
                if kl.every == 0 || kl.samples == 0 {
                    return Err(field("rm.kl", "every and samples must be at least 1"));
                }
            }
            self.schedule()?;
            let policy = self.policy(&spec)?;
            let x0 = self.x0(&spec)?;
            if !policy.contains(&x0, 0) {
                return Err(field("rm.x0", "starting state is outside the initial trust region"));
            }
        }
        let o = &self.oracle;
        if !(o.tol > 0.0) {
            return Err(field("oracle.tol", "must be positive"));
        }
        if o.max_iters == 0 {
            return Err(field("oracle.max_iters", "must be at least 1"));
        }
        if o.spectrum_k == 0 {
            return Err(field("oracle.spectrum_k", "must be at least 1"));
        }
        if let Some(grid) = spec.grid() {
            if o.spectrum_k > grid.n_interior() {
                return Err(field("oracle.spectrum_k", "cannot exceed problem.n_interior"));
            }
        }
        if let InitialGuess::Kink { width } = o.initial_guess {
            if !(width > 0.0) || !width.is_finite() {
                return Err(field("oracle.initial_guess.kink.width", "must be positive and finite"));
            }
        }
        if o.compare_bvp && self.problem.mode != Mode::Path {
            return Err(field(
                "oracle.compare_bvp",
                "only path problems have a boundary value oracle",
            ));
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        let p = &self.problem;
        if !(p.epsilon > 0.0) || !p.epsilon.is_finite() {
            return Err(field(
                "problem.epsilon",
                format!("must be positive and finite, got {}", p.epsilon),
            ));
        }
        match p.mode {
            Mode::Scalar => {
                if p.n_interior.is_some() || p.m0.is_some() {
                    return Err(field("problem.mode", "scalar problems take no grid or reference mean"));
                }
                ProblemSpec::scalar(p.potential.potential(), p.epsilon).map_err(|e| field("problem", e.to_string()))
            }
            Mode::Path => {
                let n = p
                    .n_interior
                    .ok_or_else(|| field("problem.n_interior", "required for path problems"))?;
                let grid = Grid::new(n).map_err(|e| field("problem.n_interior", e.to_string()))?;
                let spec = match &p.m0 {
                    None => ProblemSpec::path(p.potential.potential(), p.epsilon, grid, p.m_minus, p.m_plus),
                    Some(m0) => ProblemSpec::path_with_reference(
                        p.potential.potential(),
                        p.epsilon,
                        grid,
                        p.m_minus,
                        p.m_plus,
                        m0.clone(),
                    ),
                };
                spec.map_err(|e| field("problem.m0", e.to_string()))
            }
        }
    }

    fn rm(&self) -> Result<&RmConfig, CliError> {
        self.rm
            .as_ref()
            .ok_or_else(|| field("rm", "this pipeline needs an rm block"))
    }

    pub fn schedule(&self) -> Result<StepSchedule, CliError> {
        let s = self.rm()?.schedule;
        StepSchedule::new(s.a0, s.n0, s.gamma).map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => field(&format!("rm.schedule.{name}"), reason),
            other => field("rm.schedule", other.to_string()),
        })
    }

    pub fn state(&self, spec: &ProblemSpec, value: &StateSpec, name: &str) -> Result<State, CliError> {
        match (value, spec.grid()) {
            (StateSpec::Scalar(v), None) => State::scalar(*v).map_err(|e| field(name, e.to_string())),
            (StateSpec::Named(NamedState::Zero), _) => Ok(spec.zero_state()),
            (StateSpec::Path(values), Some(grid)) => PathVector::new(grid, values.clone())
                .map(State::Path)
                .map_err(|e| field(name, e.to_string())),
            (StateSpec::Scalar(_), Some(_)) => Err(field(name, "path problems need \"zero\" or a list of values")),
            (StateSpec::Path(_), None) => Err(field(name, "scalar problems need a number")),
        }
    }

    pub fn x0(&self, spec: &ProblemSpec) -> Result<State, CliError> {
        let rm = self.rm()?;
        match &rm.x0 {
            Some(x0) => self.state(spec, x0, "rm.x0"),
            None => self.state(spec, &rm.restart, "rm.restart"),
        }
    }

    pub fn policy(&self, spec: &ProblemSpec) -> Result<TrustRegionPolicy, CliError> {
        let rm = self.rm()?;
        match (rm.region, spec.is_path()) {
            (RegionShape::Interval { .. }, true) => {
                return Err(field("rm.region", "interval regions apply to scalar problems"))
            }
            (RegionShape::H1Ball { .. }, false) => return Err(field("rm.region", "H1 balls apply to path problems")),
            _ => {}
        }
        if rm.policy == PolicyKind::Fixed {
            let growth = match rm.region {
                RegionShape::Interval { growth, .. } | RegionShape::H1Ball { growth, .. } => growth,
            };
            if growth != 0.0 {
                return Err(field("rm.region.growth", "fixed regions do not grow"));
            }
        }
        let restart = self.state(spec, &rm.restart, "rm.restart")?;
        TrustRegionPolicy::from_shape(rm.policy, rm.region, restart).map_err(|e| match e {
            crate::Error::RestartOutsideRegion { .. } => {
                field("rm.restart", "restart point must lie inside the trust region")
            }
            other => field("rm.region", other.to_string()),
        })
    }

    pub fn trace_options(&self) -> Result<TraceOptions, CliError> {
        let rm = self.rm()?;
        Ok(TraceOptions {
            record_every: rm.record_every,
            state_every: rm.state_every,
            kl: rm.kl,
            sigma_cap: rm.sigma_cap,
        })
    }

    pub fn bvp_initial_guess(&self, spec: &ProblemSpec) -> Result<PathVector, CliError> {
        let grid = spec
            .grid()
            .ok_or_else(|| field("problem.mode", "the boundary value oracle needs a path problem"))?;
        Ok(match self.oracle.initial_guess {
            InitialGuess::Zero => PathVector::zeros(grid),
            InitialGuess::Kink { width } => {
                kink_initial_guess(spec, width).map_err(|e| field("oracle.initial_guess", e.to_string()))?
            }
        })
    }
}
