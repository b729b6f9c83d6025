//! The preconditioned first-variation root problem.
//!
//! For the shifted mean `x = m - m0` and `ξ ~ N(0, C0)`:
//!
//! ```text
//! F(x, ξ) = C0 Φ'(x + m0 + ξ) + x          (noisy oracle)
//! f(x)    = C0 E[Φ'(x + m0 + ξ)] + x       (drift)
//! J(x)    = E[Φ(x + m0 + ξ)] + ½‖x‖²_C0    (relative entropy up to log Z)
//! ```
//!
//! with `Φ(u) = ε⁻¹ ∫ V(u(t)) dt` on paths and `Φ(u) = ε⁻¹ V(u)` for scalars,
//! where `C0 = 1` and `m0 = 0`.

use crate::error::{Error, Result};
use crate::function_space::{apply_c0, h1_seminorm_sq, norm_h1, Grid, PathVector, ScalarState};
use crate::gaussian::GaussianSampler;
use crate::potentials::Potential;

#[derive(Debug, Clone)]
pub enum ProblemKind {
    Scalar,
    Path {
        grid: Grid,
        m_minus: f64,
        m_plus: f64,
        /// Reference mean at the interior nodes.
        m0: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    potential: Potential,
    epsilon: f64,
    kind: ProblemKind,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(
            "epsilon",
            format!("must be positive and finite, got {epsilon}"),
        ));
    }
    Ok(())
}

impl ProblemSpec {
    pub fn scalar(potential: Potential, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            potential,
            epsilon,
            kind: ProblemKind::Scalar,
        })
    }

    /// Path problem with the linear interpolant `(1 - t) m₋ + t m₊` as `m0`.
    pub fn path(potential: Potential, epsilon: f64, grid: Grid, m_minus: f64, m_plus: f64) -> Result<Self> {
        let m0 = grid.nodes().map(|t| (1.0 - t) * m_minus + t * m_plus).collect();
        Self::path_with_reference(potential, epsilon, grid, m_minus, m_plus, m0)
    }

    /// Path problem with a caller-supplied reference mean. `m0` holds the
    /// interior values; its boundary values are `m_minus` and `m_plus`.
    pub fn path_with_reference(
        potential: Potential,
        epsilon: f64,
        grid: Grid,
        m_minus: f64,
        m_plus: f64,
        m0: Vec<f64>,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        if m0.len() != grid.n_interior() {
            return Err(Error::LengthMismatch {
                len: m0.len(),
                n_interior: grid.n_interior(),
            });
        }
        if !(m_minus.is_finite() && m_plus.is_finite() && m0.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid(
                "m0",
                "boundary values and reference mean must be finite",
            ));
        }
        Ok(Self {
            potential,
            epsilon,
            kind: ProblemKind::Path {
                grid,
                m_minus,
                m_plus,
                m0,
            },
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn is_path(&self) -> bool {
        matches!(self.kind, ProblemKind::Path { .. })
    }

    pub fn grid(&self) -> Option<Grid> {
        match &self.kind {
            ProblemKind::Scalar => None,
            ProblemKind::Path { grid, .. } => Some(*grid),
        }
    }

    pub fn boundary(&self) -> Option<(f64, f64)> {
        match &self.kind {
            ProblemKind::Scalar => None,
            ProblemKind::Path { m_minus, m_plus, .. } => Some((*m_minus, *m_plus)),
        }
    }

    pub fn m0(&self) -> Option<&[f64]> {
        match &self.kind {
            ProblemKind::Scalar => None,
            ProblemKind::Path { m0, .. } => Some(m0),
        }
    }

    /// A sampler of the matching reference Gaussian.
    pub fn sampler(&self, seed: u64) -> GaussianSampler {
        match &self.kind {
            ProblemKind::Scalar => GaussianSampler::scalar(seed),
            ProblemKind::Path { grid, .. } => GaussianSampler::bridge(*grid, seed),
        }
    }

    pub fn zero_state(&self) -> State {
        match &self.kind {
            ProblemKind::Scalar => State::Scalar(ScalarState::zero()),
            ProblemKind::Path { grid, .. } => State::Path(PathVector::zeros(*grid)),
        }
    }

    fn mode_name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Scalar => "scalar",
            ProblemKind::Path { .. } => "path",
        }
    }

    fn path_parts<'a>(&'a self, x: &'a State) -> Result<(Grid, &'a [f64], &'a PathVector)> {
        match (&self.kind, x) {
            (ProblemKind::Path { grid, m0, .. }, State::Path(p)) => {
                grid.check_same(&p.grid())?;
                Ok((*grid, m0, p))
            }
            _ => Err(Error::ModeMismatch {
                expected: self.mode_name(),
                got: x.mode_name(),
            }),
        }
    }

    fn scalar_part(&self, x: &State) -> Result<f64> {
        match (&self.kind, x) {
            (ProblemKind::Scalar, State::Scalar(s)) => Ok(s.value()),
            _ => Err(Error::ModeMismatch {
                expected: self.mode_name(),
                got: x.mode_name(),
            }),
        }
    }
}

/// Iterate of the root problem, tagged by mode.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Scalar(ScalarState),
    Path(PathVector),
}

impl State {
    pub fn scalar(value: f64) -> Result<Self> {
        ScalarState::new(value).map(State::Scalar)
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            State::Scalar(_) => "scalar",
            State::Path(_) => "path",
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            State::Scalar(s) => Some(s.value()),
            State::Path(_) => None,
        }
    }

    pub fn as_path(&self) -> Option<&PathVector> {
        match self {
            State::Scalar(_) => None,
            State::Path(p) => Some(p),
        }
    }

    /// Cameron–Martin norm: `|x|` for scalars, the discrete `H^1_0` norm for paths.
    pub fn norm(&self) -> f64 {
        match self {
            State::Scalar(s) => s.value().abs(),
            State::Path(p) => norm_h1(p),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            State::Scalar(s) => s.value().is_finite(),
            State::Path(p) => p.is_finite(),
        }
    }

    /// `self + alpha * other`. The result may be non-finite; callers that need
    /// a valid iterate check [`State::is_finite`].
    pub fn add_scaled(&self, alpha: f64, other: &State) -> Result<State> {
        match (self, other) {
            (State::Scalar(a), State::Scalar(b)) => {
                Ok(State::Scalar(ScalarState::unchecked(a.value() + alpha * b.value())))
            }
            (State::Path(a), State::Path(b)) => Ok(State::Path(a.add_scaled(alpha, b)?)),
            _ => Err(Error::ModeMismatch {
                expected: self.mode_name(),
                got: other.mode_name(),
            }),
        }
    }

    /// Cameron–Martin distance between two states of the same mode.
    pub fn distance(&self, other: &State) -> Result<f64> {
        Ok(self.add_scaled(-1.0, other)?.norm())
    }
}

/// One draw `ξ ~ N(0, C0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Scalar(f64),
    Path(PathVector),
}

pub fn draw_noise(spec: &ProblemSpec, sampler: &mut GaussianSampler) -> Result<Noise> {
    match spec.kind {
        ProblemKind::Scalar => sampler.sample_scalar().map(Noise::Scalar),
        ProblemKind::Path { grid, .. } => {
            let xi = sampler.sample_bridge()?;
            grid.check_same(&xi.grid())?;
            Ok(Noise::Path(xi))
        }
    }
}

/// `F(x, ξ)` for a given noise realization.
pub fn oracle_with_noise(spec: &ProblemSpec, x: &State, noise: &Noise) -> Result<State> {
    let inv_eps = 1.0 / spec.epsilon;
    match noise {
        Noise::Scalar(xi) => {
            let x = spec.scalar_part(x)?;
            let value = inv_eps * spec.potential.v_prime(x + xi) + x;
            Ok(State::Scalar(ScalarState::unchecked(value)))
        }
        Noise::Path(xi) => {
            let (grid, m0, p) = spec.path_parts(x)?;
            grid.check_same(&xi.grid())?;
            let g: Vec<f64> = p
                .values()
                .iter()
                .zip(m0)
                .zip(xi.values())
                .map(|((x, m), z)| inv_eps * spec.potential.v_prime(x + m + z))
                .collect();
            let g = PathVector::new(grid, g)?;
            Ok(State::Path(apply_c0(&g).add_scaled(1.0, p)?))
        }
    }
}

/// `F(x, ξ)` with one fresh draw of `ξ`.
pub fn noisy_oracle(spec: &ProblemSpec, x: &State, sampler: &mut GaussianSampler) -> Result<State> {
    // Validate the state before consuming a draw.
    match spec.kind {
        ProblemKind::Scalar => {
            spec.scalar_part(x)?;
        }
        ProblemKind::Path { .. } => {
            spec.path_parts(x)?;
        }
    }
    let noise = draw_noise(spec, sampler)?;
    oracle_with_noise(spec, x, &noise)
}

/// Pointwise variance of the bridge at time `t`.
fn bridge_variance(t: f64) -> f64 {
    t * (1.0 - t)
}

/// `f(x) = E[F(x, ξ)]` in closed form.
pub fn drift(spec: &ProblemSpec, x: &State) -> Result<State> {
    let inv_eps = 1.0 / spec.epsilon;
    match spec.kind {
        ProblemKind::Scalar => {
            let x = spec.scalar_part(x)?;
            let value = inv_eps * spec.potential.averaged_v_prime(x, 1.0)? + x;
            Ok(State::Scalar(ScalarState::unchecked(value)))
        }
        ProblemKind::Path { .. } => {
            let (grid, m0, p) = spec.path_parts(x)?;
            let g = p
                .values()
                .iter()
                .zip(m0)
                .zip(grid.nodes())
                .map(|((x, m), t)| Ok(inv_eps * spec.potential.averaged_v_prime(x + m, bridge_variance(t))?))
                .collect::<Result<Vec<f64>>>()?;
            let g = PathVector::new(grid, g)?;
            Ok(State::Path(apply_c0(&g).add_scaled(1.0, p)?))
        }
    }
}

/// `Φ(x + m0 + ξ)` for one noise realization.
pub fn potential_energy(spec: &ProblemSpec, x: &State, noise: &Noise) -> Result<f64> {
    let inv_eps = 1.0 / spec.epsilon;
    match noise {
        Noise::Scalar(xi) => Ok(inv_eps * spec.potential.v(spec.scalar_part(x)? + xi)),
        Noise::Path(xi) => {
            let (grid, m0, p) = spec.path_parts(x)?;
            grid.check_same(&xi.grid())?;
            let sum: f64 = p
                .values()
                .iter()
                .zip(m0)
                .zip(xi.values())
                .map(|((x, m), z)| spec.potential.v(x + m + z))
                .sum();
            Ok(inv_eps * sum * grid.dt())
        }
    }
}

/// Monte Carlo estimate of `J(x) - log Z`.
///
/// Only differences between estimates are meaningful; evaluating two states
/// with samplers built from the same seed gives common random numbers.
pub fn kl_estimate(spec: &ProblemSpec, x: &State, sampler: &mut GaussianSampler, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "need at least one sample"));
    }
    let quadratic = match x {
        State::Scalar(s) => 0.5 * s.value() * s.value(),
        State::Path(p) => 0.5 * h1_seminorm_sq(p.values(), p.grid().dt()),
    };
    let mut sum = 0.0;
    for _ in 0..n_samples {
        let noise = draw_noise(spec, sampler)?;
        sum += potential_energy(spec, x, &noise)?;
    }
    Ok(sum / n_samples as f64 + quadratic)
}

/// Multiplication part `q` of `J''(x) = q + C0⁻¹`, one value per node
/// (a single value for scalar problems).
pub fn second_variation_diag(spec: &ProblemSpec, x: &State) -> Result<Vec<f64>> {
    let inv_eps = 1.0 / spec.epsilon;
    match spec.kind {
        ProblemKind::Scalar => {
            let x = spec.scalar_part(x)?;
            Ok(vec![inv_eps * spec.potential.averaged_v_double_prime(x, 1.0)?])
        }
        ProblemKind::Path { .. } => {
            let (grid, m0, p) = spec.path_parts(x)?;
            p.values()
                .iter()
                .zip(m0)
                .zip(grid.nodes())
                .map(|((x, m), t)| Ok(inv_eps * spec.potential.averaged_v_double_prime(x + m, bridge_variance(t))?))
                .collect()
        }
    }
}
