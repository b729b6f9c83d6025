//! Robbins–Monro iteration with truncation onto trust regions.
//!
//! Each step proposes `x - a_{n+1} F(x, ξ_{n+1})`. A proposal inside the
//! current region is accepted; otherwise the iterate restarts at a restart
//! point and the truncation counter `σ` increments. Under the fixed policy
//! every region is `U₁`; under the expanding policy the current region is
//! `U_σ`.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSampler;
use crate::objective::{draw_noise, kl_estimate, oracle_with_noise, Noise, ProblemSpec, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fixed,
    Expanding,
}

/// A family of trust regions `U_0, U_1, ...` indexed by region number.
pub trait RegionFamily: Send + Sync {
    fn contains(&self, x: &State, index: usize) -> bool;

    fn describe(&self) -> String {
        "custom".to_string()
    }
}

/// Built-in region shapes. Region `k` grows linearly with `k` at rate `growth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RegionShape {
    /// Open interval `(lo - growth k, hi + growth k)` for scalar states.
    Interval { lo: f64, hi: f64, growth: f64 },
    /// `{ x : ‖x‖_{H¹} <= radius + growth k }` for path states.
    H1Ball { radius: f64, growth: f64 },
}

impl RegionShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionShape::Interval { lo, hi, growth } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::invalid(
                        "region",
                        format!("interval ({lo}, {hi}) is empty or unbounded"),
                    ));
                }
                if !(growth >= 0.0) || !growth.is_finite() {
                    return Err(Error::invalid("growth", "must be finite and >= 0"));
                }
            }
            RegionShape::H1Ball { radius, growth } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid("radius", "must be positive and finite"));
                }
                if !(growth >= 0.0) || !growth.is_finite() {
                    return Err(Error::invalid("growth", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }
}

impl RegionFamily for RegionShape {
    fn contains(&self, x: &State, index: usize) -> bool {
        if !x.is_finite() {
            return false;
        }
        let k = index as f64;
        match (*self, x) {
            (RegionShape::Interval { lo, hi, growth }, State::Scalar(s)) => {
                let v = s.value();
                lo - growth * k < v && v < hi + growth * k
            }
            (RegionShape::H1Ball { radius, growth }, State::Path(_)) => x.norm() <= radius + growth * k,
            _ => false,
        }
    }

    fn describe(&self) -> String {
        match *self {
            RegionShape::Interval { lo, hi, growth } => format!("interval ({lo}, {hi}) growth {growth}"),
            RegionShape::H1Ball { radius, growth } => format!("H1 ball radius {radius} growth {growth}"),
        }
    }
}

#[derive(Clone)]
pub enum RestartRule {
    Constant(State),
    /// Restart point as a function of the truncation count.
    Indexed(Arc<dyn Fn(usize) -> State + Send + Sync>),
}

impl RestartRule {
    pub fn point(&self, sigma: usize) -> State {
        match self {
            RestartRule::Constant(s) => s.clone(),
            RestartRule::Indexed(f) => f(sigma),
        }
    }
}

impl fmt::Debug for RestartRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestartRule::Constant(s) => f.debug_tuple("Constant").field(s).finish(),
            RestartRule::Indexed(_) => f.write_str("Indexed(..)"),
        }
    }
}

#[derive(Clone)]
pub struct TrustRegionPolicy {
    kind: PolicyKind,
    regions: Arc<dyn RegionFamily>,
    restart: RestartRule,
}

impl fmt::Debug for TrustRegionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrustRegionPolicy")
            .field("kind", &self.kind)
            .field("regions", &self.regions.describe())
            .field("restart", &self.restart)
            .finish()
    }
}

impl TrustRegionPolicy {
    pub fn new(kind: PolicyKind, regions: Arc<dyn RegionFamily>, restart: RestartRule) -> Self {
        Self { kind, regions, restart }
    }

    /// Fixed open interval `U₁ = (lo, hi)` with a constant restart point.
    pub fn fixed_interval(lo: f64, hi: f64, restart: f64) -> Result<Self> {
        Self::from_shape(
            PolicyKind::Fixed,
            RegionShape::Interval { lo, hi, growth: 0.0 },
            State::scalar(restart)?,
        )
    }

    /// `U_k = (lo - growth k, hi + growth k)` with a constant restart point.
    pub fn expanding_interval(lo: f64, hi: f64, growth: f64, restart: f64) -> Result<Self> {
        Self::from_shape(
            PolicyKind::Expanding,
            RegionShape::Interval { lo, hi, growth },
            State::scalar(restart)?,
        )
    }

    pub fn fixed_h1_ball(radius: f64, restart: State) -> Result<Self> {
        Self::from_shape(PolicyKind::Fixed, RegionShape::H1Ball { radius, growth: 0.0 }, restart)
    }

    pub fn expanding_h1_ball(radius: f64, growth: f64, restart: State) -> Result<Self> {
        Self::from_shape(PolicyKind::Expanding, RegionShape::H1Ball { radius, growth }, restart)
    }

    pub fn from_shape(kind: PolicyKind, shape: RegionShape, restart: State) -> Result<Self> {
        shape.validate()?;
        let policy = Self::new(kind, Arc::new(shape), RestartRule::Constant(restart));
        policy.check_restart(0)?;
        Ok(policy)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn restart_rule(&self) -> &RestartRule {
        &self.restart
    }

    /// Index of the region in force after `sigma` truncations.
    pub fn region_index(&self, sigma: usize) -> usize {
        match self.kind {
            PolicyKind::Fixed => 1,
            PolicyKind::Expanding => sigma,
        }
    }

    pub fn contains(&self, x: &State, sigma: usize) -> bool {
        x.is_finite() && self.regions.contains(x, self.region_index(sigma))
    }

    pub fn restart_point(&self, sigma: usize) -> State {
        self.restart.point(sigma)
    }

    /// Checks that the restart used at truncation count `sigma` lands inside
    /// the region that will be in force afterwards.
    pub fn check_restart(&self, sigma: usize) -> Result<()> {
        if !self.contains(&self.restart_point(sigma), sigma + 1) {
            return Err(Error::RestartOutsideRegion {
                region: self.region_index(sigma + 1),
            });
        }
        Ok(())
    }
}

/// `a_n = a0 / (n + n0)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    a0: f64,
    n0: f64,
    gamma: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            a0: 1.0,
            n0: 10.0,
            gamma: 1.0,
        }
    }
}

impl StepSchedule {
    pub fn new(a0: f64, n0: f64, gamma: f64) -> Result<Self> {
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(Error::invalid("a0", format!("must be positive and finite, got {a0}")));
        }
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(Error::invalid("n0", format!("must be finite and >= 0, got {n0}")));
        }
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in (1/2, 1] so that sum a_n diverges and sum a_n^2 converges, got {gamma}"),
            ));
        }
        Ok(Self { a0, n0, gamma })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Step size `a_n` for `n >= 1`.
    pub fn step(&self, n: usize) -> f64 {
        self.a0 / (n as f64 + self.n0).powf(self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub sigma: usize,
    pub truncated: bool,
    /// The proposal overflowed or produced NaN.
    pub non_finite: bool,
    pub step_size: f64,
    /// The rejected proposal, present only on truncated steps.
    pub rejected: Option<State>,
}

/// One step from iteration index `n` (the step uses `a_{n+1}`) with a given
/// noise draw.
pub fn rm_step_with_noise(
    spec: &ProblemSpec,
    policy: &TrustRegionPolicy,
    schedule: &StepSchedule,
    x: &State,
    sigma: usize,
    n: usize,
    noise: &Noise,
) -> Result<StepOutcome> {
    let step_size = schedule.step(n + 1);
    let f = oracle_with_noise(spec, x, noise)?;
    let proposal = x.add_scaled(-step_size, &f)?;
    if policy.contains(&proposal, sigma) {
        return Ok(StepOutcome {
            state: proposal,
            sigma,
            truncated: false,
            non_finite: false,
            step_size,
            rejected: None,
        });
    }
    policy.check_restart(sigma)?;
    Ok(StepOutcome {
        state: policy.restart_point(sigma),
        sigma: sigma + 1,
        truncated: true,
        non_finite: !proposal.is_finite(),
        step_size,
        rejected: Some(proposal),
    })
}

/// One step, consuming exactly one draw from `sampler`.
pub fn rm_step(
    spec: &ProblemSpec,
    policy: &TrustRegionPolicy,
    schedule: &StepSchedule,
    x: &State,
    sigma: usize,
    n: usize,
    sampler: &mut GaussianSampler,
) -> Result<StepOutcome> {
    let noise = draw_noise(spec, sampler)?;
    rm_step_with_noise(spec, policy, schedule, x, sigma, n, &noise)
}

/// Periodic relative-entropy estimates along a run. Each evaluation uses a
/// fresh sampler seeded with `seed`, so estimates share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlCadence {
    pub every: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    /// Keep a per-iteration record every this many iterations.
    pub record_every: usize,
    /// Keep a full state snapshot every this many iterations (`None`: never).
    pub state_every: Option<usize>,
    pub kl: Option<KlCadence>,
    /// Abort once this many truncations have occurred.
    pub sigma_cap: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            state_every: Some(100),
            kl: None,
            sigma_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n: usize,
    pub sigma: usize,
    pub a: f64,
    pub truncated: bool,
    pub non_finite: bool,
    pub norm_x: f64,
    pub kl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RmTrace {
    pub records: Vec<TraceRecord>,
    pub snapshots: Vec<(usize, State)>,
    pub final_state: State,
    pub iterations: usize,
    pub total_truncations: usize,
    pub non_finite_truncations: usize,
    pub wall_time: Duration,
}

impl PartialEq for RmTrace {
    /// Equality ignores wall time.
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.snapshots == other.snapshots
            && self.final_state == other.final_state
            && self.iterations == other.iterations
            && self.total_truncations == other.total_truncations
            && self.non_finite_truncations == other.non_finite_truncations
    }
}

fn kl_at(spec: &ProblemSpec, x: &State, cadence: &KlCadence) -> Result<f64> {
    let mut sampler = spec.sampler(cadence.seed);
    kl_estimate(spec, x, &mut sampler, cadence.samples)
}

/// Runs `n_iters` truncated Robbins–Monro steps from `x0` with `σ = 0`.
pub fn rm_run(
    spec: &ProblemSpec,
    policy: &TrustRegionPolicy,
    schedule: &StepSchedule,
    x0: &State,
    sampler: &mut GaussianSampler,
    n_iters: usize,
    options: &TraceOptions,
) -> Result<RmTrace> {
    if n_iters == 0 {
        return Err(Error::invalid("n_iters", "must be at least 1"));
    }
    if options.record_every == 0 || options.state_every == Some(0) {
        return Err(Error::invalid("trace", "thinning intervals must be positive"));
    }
    if let Some(kl) = &options.kl {
        if kl.every == 0 || kl.samples == 0 {
            return Err(Error::invalid("kl", "cadence and sample count must be positive"));
        }
    }
    if !policy.contains(x0, 0) {
        return Err(Error::StartOutsideRegion);
    }

    let start = Instant::now();
    let mut x = x0.clone();
    let mut sigma = 0;
    let mut non_finite = 0;
    let mut records = Vec::with_capacity(n_iters / options.record_every + 1);
    let mut snapshots = Vec::new();

    for n in 0..n_iters {
        let outcome = rm_step(spec, policy, schedule, &x, sigma, n, sampler)?;
        let iteration = n + 1;
        x = outcome.state;
        sigma = outcome.sigma;
        if outcome.non_finite {
            non_finite += 1;
        }
        debug_assert!(policy.contains(&x, sigma), "iterate left its trust region");
        if sigma > options.sigma_cap {
            return Err(Error::TruncationStorm {
                sigma,
                iterations: iteration,
            });
        }

        let last = iteration == n_iters;
        if iteration % options.record_every == 0 || last {
            let kl = match &options.kl {
                Some(c) if iteration % c.every == 0 || last => Some(kl_at(spec, &x, c)?),
                _ => None,
            };
            records.push(TraceRecord {
                n: iteration,
                sigma,
                a: outcome.step_size,
                truncated: outcome.truncated,
                non_finite: outcome.non_finite,
                norm_x: x.norm(),
                kl,
            });
        }
        if let Some(every) = options.state_every {
            if iteration % every == 0 || last {
                snapshots.push((iteration, x.clone()));
            }
        }
    }

    Ok(RmTrace {
        records,
        snapshots,
        final_state: x,
        iterations: n_iters,
        total_truncations: sigma,
        non_finite_truncations: non_finite,
        wall_time: start.elapsed(),
    })
}
