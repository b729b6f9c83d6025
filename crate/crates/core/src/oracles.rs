//! Deterministic reference computations for path problems.
//!
//! [`bvp_solve`] finds roots of the drift by Newton's method on the
//! discretized Euler–Lagrange equation
//! `ε⁻¹ E[V'(x + m0 + ξ)] - x'' = 0, x(0) = x(1) = 0`.
//! [`schrodinger_eigs`] returns the low spectrum of the discretized
//! second variation `-d²/dt² + q(t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{apply_c0_inverse, norm_h1, PathVector};
use crate::objective::{drift, second_variation_diag, ProblemSpec, State};
use crate::tridiag::SymTridiagonal;

pub const DEFAULT_BVP_TOL: f64 = 1e-10;
pub const DEFAULT_BVP_MAX_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
const EIG_REL_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub x_star: PathVector,
    /// `‖f(x_star)‖_{H¹}`, the preconditioned residual.
    pub residual_h1: f64,
    pub newton_iters: usize,
    pub converged: bool,
}

fn path_state(spec: &ProblemSpec, x: &PathVector) -> Result<State> {
    let grid = spec.grid().ok_or(Error::ModeMismatch {
        expected: "path",
        got: "scalar",
    })?;
    grid.check_same(&x.grid())?;
    Ok(State::Path(x.clone()))
}

fn preconditioned_residual(spec: &ProblemSpec, x: &PathVector) -> Result<f64> {
    let f = drift(spec, &State::Path(x.clone()))?;
    Ok(f.norm())
}

/// Damped Newton iteration for a root of the drift.
pub fn bvp_solve(spec: &ProblemSpec, x_init: &PathVector, tol: f64, max_iters: usize) -> Result<BvpSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be at least 1"));
    }
    let grid = path_state(spec, x_init)?.as_path().unwrap().grid();
    let dt = grid.dt();
    let mut x = x_init.clone();
    let mut residual = preconditioned_residual(spec, &x)?;

    for iter in 0..max_iters {
        if residual <= tol {
            return Ok(BvpSolution {
                x_star: x,
                residual_h1: residual,
                newton_iters: iter,
                converged: true,
            });
        }
        let state = State::Path(x.clone());
        // G(x) = C0^{-1} f(x) and its Jacobian (-Δ) + diag(q).
        let g = apply_c0_inverse(drift(spec, &state)?.as_path().unwrap());
        let q = second_variation_diag(spec, &state)?;
        let jacobian = SymTridiagonal::dirichlet_laplacian(grid.n_interior(), dt, Some(&q));
        let update = jacobian.solve(g.values())?;
        let update = PathVector::new(grid, update)?;
        let update_norm = norm_h1(&update);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = x.add_scaled(-scale, &update)?;
            if trial.is_finite() {
                let r = preconditioned_residual(spec, &trial)?;
                if r < residual {
                    accepted = Some((trial, r));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, r)) => {
                x = trial;
                residual = r;
            }
            None => {
                // No decrease along the Newton direction; the iterate sits at
                // the rounding floor if the update itself is negligible.
                let converged = update_norm <= tol;
                return Ok(BvpSolution {
                    x_star: x,
                    residual_h1: residual,
                    newton_iters: iter + 1,
                    converged,
                });
            }
        }
        if update_norm * scale <= tol {
            return Ok(BvpSolution {
                x_star: x,
                residual_h1: residual,
                newton_iters: iter + 1,
                converged: residual <= tol,
            });
        }
    }
    Ok(BvpSolution {
        converged: residual <= tol,
        x_star: x,
        residual_h1: residual,
        newton_iters: max_iters,
    })
}

/// Newton start for problems whose minimizer is a sharp transition: the
/// offset `x = m - m0` of `m(t) = m₋ + (m₊ - m₋) tanh(t / width) / tanh(1 / width)`.
pub fn kink_initial_guess(spec: &ProblemSpec, width: f64) -> Result<PathVector> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::invalid("width", "must be positive and finite"));
    }
    let (grid, (m_minus, m_plus), m0) = match (spec.grid(), spec.boundary(), spec.m0()) {
        (Some(g), Some(b), Some(m0)) => (g, b, m0),
        _ => {
            return Err(Error::ModeMismatch {
                expected: "path",
                got: "scalar",
            })
        }
    };
    let scale = (1.0 / width).tanh();
    let values = grid
        .nodes()
        .zip(m0)
        .map(|(t, m)| m_minus + (m_plus - m_minus) * (t / width).tanh() / scale - m)
        .collect();
    PathVector::new(grid, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub potential: String,
    pub epsilon: f64,
    pub n_interior: usize,
    /// `‖x‖_{H¹}` of the state the operator was linearized at.
    pub state_norm_h1: f64,
}

/// The discretized second variation `(-Δ_dt) + diag(q(x))`.
pub fn second_variation_matrix(spec: &ProblemSpec, x: &PathVector) -> Result<SymTridiagonal> {
    let state = path_state(spec, x)?;
    let q = second_variation_diag(spec, &state)?;
    let grid = x.grid();
    Ok(SymTridiagonal::dirichlet_laplacian(
        grid.n_interior(),
        grid.dt(),
        Some(&q),
    ))
}

/// The `k` smallest eigenvalues of the second variation at `x`.
pub fn schrodinger_eigs(spec: &ProblemSpec, x: &PathVector, k: usize) -> Result<SpectrumReport> {
    let matrix = second_variation_matrix(spec, x)?;
    let eigenvalues = matrix.smallest_eigenvalues(k, EIG_REL_WIDTH)?;
    Ok(SpectrumReport {
        eigenvalues,
        potential: spec.potential().name().to_string(),
        epsilon: spec.epsilon(),
        n_interior: x.len(),
        state_norm_h1: norm_h1(x),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// Smallest eigenvalue of the full second variation.
    pub min_eig: f64,
    /// Smallest node value of the multiplication part `q`.
    pub min_q: f64,
    /// Smallest `θ >= 0` with `q >= -θ / λ₁` pointwise.
    pub theta_bound: f64,
    /// Whether the pointwise bound holds with `θ < 1`.
    pub satisfies_pointwise_bound: bool,
}

pub fn convexity_check(spec: &ProblemSpec, x: &PathVector) -> Result<ConvexityReport> {
    let state = path_state(spec, x)?;
    let q = second_variation_diag(spec, &state)?;
    let min_q = q.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda1 = x.grid().c0_top_eigenvalue();
    let theta_bound = (-lambda1 * min_q).max(0.0);
    let min_eig = schrodinger_eigs(spec, x, 1)?.eigenvalues[0];
    Ok(ConvexityReport {
        min_eig,
        min_q,
        theta_bound,
        satisfies_pointwise_bound: theta_bound < 1.0,
    })
}
