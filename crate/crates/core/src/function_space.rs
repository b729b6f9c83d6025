//! Discretized path space on `(0, 1)` with homogeneous Dirichlet boundary.
//!
//! Paths are stored by their interior node values only; the implied boundary
//! values are zero. The reference covariance is `C0 = (-d²/dt²)^{-1}` and is
//! realized by the standard three-point second difference.

use crate::error::{Error, Result};
use crate::tridiag::SymTridiagonal;

/// Uniform grid with `n_interior` interior nodes `t_i = i * dt`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_interior: usize,
    dt: f64,
}

impl Grid {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::invalid("n_interior", "grid needs at least one interior node"));
        }
        Ok(Self {
            n_interior,
            dt: 1.0 / (n_interior as f64 + 1.0),
        })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of interior node `i` (zero based, so `node(0) == dt`).
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dt
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_interior).map(move |i| self.node(i))
    }

    /// Largest eigenvalue of the discrete `C0`, the discrete analogue of `1/pi^2`.
    pub fn c0_top_eigenvalue(&self) -> f64 {
        self.c0_eigenvalue(1)
    }

    /// Eigenvalue of the discrete `C0` for sine mode `k` (1 based).
    pub fn c0_eigenvalue(&self, k: usize) -> f64 {
        let s = (k as f64 * std::f64::consts::PI * self.dt / 2.0).sin();
        self.dt * self.dt / (4.0 * s * s)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_interior != other.n_interior {
            return Err(Error::GridMismatch {
                left: self.n_interior,
                right: other.n_interior,
            });
        }
        Ok(())
    }

    fn laplacian(&self) -> SymTridiagonal {
        SymTridiagonal::dirichlet_laplacian(self.n_interior, self.dt, None)
    }
}

/// Interior values of a path in `H^1_0(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathVector {
    grid: Grid,
    values: Vec<f64>,
}

impl PathVector {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior {
            return Err(Error::LengthMismatch {
                len: values.len(),
                n_interior: grid.n_interior,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_interior],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &PathVector) -> Result<PathVector> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(PathVector {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs_diff(&self, other: &PathVector) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }
}

/// Scalar iterate for the one-dimensional problem (`C0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarState {
    value: f64,
}

impl ScalarState {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("value", "scalar state must be finite"));
        }
        Ok(Self { value })
    }

    pub fn zero() -> Self {
        Self { value: 0.0 }
    }

    /// Proposals may overflow; the engine checks finiteness before accepting.
    pub(crate) fn unchecked(value: f64) -> Self {
        Self { value }
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Rectangle-rule `L^2(0,1)` inner product over interior nodes.
pub fn inner_l2(a: &PathVector, b: &PathVector) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() * a.grid.dt)
}

pub fn norm_l2(x: &PathVector) -> f64 {
    (x.values.iter().map(|v| v * v).sum::<f64>() * x.grid.dt).sqrt()
}

/// Discrete Dirichlet norm, which is the Cameron–Martin norm of `C0`.
pub fn norm_h1(x: &PathVector) -> f64 {
    h1_seminorm_sq(&x.values, x.grid.dt).sqrt()
}

pub(crate) fn h1_seminorm_sq(values: &[f64], dt: f64) -> f64 {
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &v in values {
        acc += (v - prev) * (v - prev);
        prev = v;
    }
    acc += prev * prev;
    acc / dt
}

/// `u = C0 rhs`, i.e. the solution of `(-Δ_dt) u = rhs` with zero boundary values.
pub fn apply_c0(rhs: &PathVector) -> PathVector {
    let values = rhs
        .grid
        .laplacian()
        .solve(&rhs.values)
        .expect("the Dirichlet Laplacian is positive definite");
    PathVector { grid: rhs.grid, values }
}

/// `(-Δ_dt) u`.
pub fn apply_c0_inverse(u: &PathVector) -> PathVector {
    let inv_dt2 = 1.0 / (u.grid.dt * u.grid.dt);
    let n = u.values.len();
    let values = (0..n)
        .map(|i| {
            let left = if i > 0 { u.values[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u.values[i + 1] } else { 0.0 };
            (2.0 * u.values[i] - left - right) * inv_dt2
        })
        .collect();
    PathVector { grid: u.grid, values }
}
