//! Samplers for the reference Gaussian `N(0, C0)`.
//!
//! Scalar problems draw standard normals. Path problems draw the standard
//! Brownian bridge on the grid through the Karhunen–Loève expansion in the
//! exact eigenpairs of the discrete `C0`, so the sample covariance is the
//! discrete `C0` itself. The sine sum is evaluated with an FFT.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::function_space::{Grid, PathVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    Scalar,
    Bridge,
}

impl SamplerMode {
    fn name(self) -> &'static str {
        match self {
            SamplerMode::Scalar => "scalar",
            SamplerMode::Bridge => "bridge",
        }
    }
}

/// Seed of worker `index` in a parallel sweep rooted at `master`.
pub fn worker_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index)
}

struct SineBasis {
    // sqrt(2 * lambda_k), k = 1..=n
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SineBasis {
    fn new(grid: Grid) -> Self {
        let n = grid.n_interior();
        let amplitudes = (1..=n).map(|k| (2.0 * grid.c0_eigenvalue(k)).sqrt()).collect();
        let len = 2 * (n + 1);
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            amplitudes,
            fft,
            buffer: vec![Complex::default(); len],
            scratch,
        }
    }

    /// `out_i = sum_k coeffs_k sin(pi k i / (n + 1))` for `i = 1..=n` (DST-I).
    fn synthesize(&mut self, coeffs: &[f64], out: &mut [f64]) {
        let n = coeffs.len();
        let len = self.buffer.len();
        self.buffer.fill(Complex::default());
        for (k, &c) in coeffs.iter().enumerate() {
            self.buffer[k + 1].re = c;
            self.buffer[len - k - 1].re = -c;
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (o, b) in out.iter_mut().zip(&self.buffer[1..=n]) {
            *o = -0.5 * b.im;
        }
    }
}

/// Reproducible stream of draws from `N(0, C0)`.
pub struct GaussianSampler {
    mode: SamplerMode,
    grid: Option<Grid>,
    seed: u64,
    rng: ChaCha8Rng,
    basis: Option<SineBasis>,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for GaussianSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSampler")
            .field("mode", &self.mode)
            .field("grid", &self.grid)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl GaussianSampler {
    pub fn scalar(seed: u64) -> Self {
        Self {
            mode: SamplerMode::Scalar,
            grid: None,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            basis: None,
            coeffs: Vec::new(),
        }
    }

    pub fn bridge(grid: Grid, seed: u64) -> Self {
        Self {
            mode: SamplerMode::Bridge,
            grid: Some(grid),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            basis: Some(SineBasis::new(grid)),
            coeffs: vec![0.0; grid.n_interior()],
        }
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn expect_mode(&self, expected: SamplerMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::ModeMismatch {
                expected: expected.name(),
                got: self.mode.name(),
            });
        }
        Ok(())
    }

    pub fn sample_scalar(&mut self) -> Result<f64> {
        self.expect_mode(SamplerMode::Scalar)?;
        Ok(self.rng.sample(StandardNormal))
    }

    pub fn sample_bridge(&mut self) -> Result<PathVector> {
        self.expect_mode(SamplerMode::Bridge)?;
        let grid = self.grid.expect("bridge sampler has a grid");
        let basis = self.basis.as_mut().expect("bridge sampler has a basis");
        for (c, amp) in self.coeffs.iter_mut().zip(&basis.amplitudes) {
            let z: f64 = self.rng.sample(StandardNormal);
            *c = z * amp;
        }
        let mut values = vec![0.0; grid.n_interior()];
        basis.synthesize(&self.coeffs, &mut values);
        PathVector::new(grid, values)
    }
}
