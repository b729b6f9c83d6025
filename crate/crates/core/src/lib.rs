//! Best-fit Gaussian means in relative entropy by truncated Robbins–Monro.
//!
//! The mean `m = m0 + x` of `N(m, C0)` minimizing the relative entropy to a
//! measure `μ ∝ exp(-Φ) μ0` is a root of the preconditioned first variation
//! `f(x) = C0 E[Φ'(x + m0 + ξ)] + x`. This crate samples the noisy version of
//! `f`, runs the truncated stochastic approximation on it, and provides
//! deterministic Newton and spectral references for path problems.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod function_space;
pub mod gaussian;
pub mod objective;
pub mod oracles;
pub mod potentials;
pub mod rm_engine;
pub mod tridiag;

pub use error::{Error, Result};
pub use function_space::{apply_c0, apply_c0_inverse, inner_l2, norm_h1, norm_l2, Grid, PathVector, ScalarState};
pub use gaussian::{worker_seed, GaussianSampler, SamplerMode};
pub use objective::{
    draw_noise, drift, kl_estimate, noisy_oracle, oracle_with_noise, second_variation_diag, Noise, ProblemKind,
    ProblemSpec, State,
};
pub use oracles::{
    bvp_solve, convexity_check, kink_initial_guess, schrodinger_eigs, BvpSolution, ConvexityReport, SpectrumReport,
};
pub use potentials::{Potential, UserPotential};
pub use rm_engine::{
    rm_run, rm_step, rm_step_with_noise, KlCadence, PolicyKind, RegionFamily, RegionShape, RestartRule, RmTrace,
    StepOutcome, StepSchedule, TraceOptions, TraceRecord, TrustRegionPolicy,
};
