//! Pointwise potentials `V` and their averages against centered Gaussians.
//!
//! For `ζ ~ N(0, s)` the built-in polynomial potentials have closed-form
//! averages of `V'`, `V''` and `(V')²`; user potentials fall back to a
//! 64-node Gauss–Hermite rule unless they provide their own.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// A smooth potential supplied by the caller.
///
/// The averaged hooks return `None` to request quadrature.
pub trait UserPotential: Send + Sync {
    fn name(&self) -> &str;
    fn v(&self, u: f64) -> f64;
    fn v_prime(&self, u: f64) -> f64;
    fn v_double_prime(&self, u: f64) -> f64;

    fn averaged_v_prime(&self, _u: f64, _s: f64) -> Option<f64> {
        None
    }
    fn averaged_v_double_prime(&self, _u: f64, _s: f64) -> Option<f64> {
        None
    }
    fn averaged_v_prime_sq(&self, _u: f64, _s: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone)]
pub enum Potential {
    /// `V(u) = u²/2 + u⁴/4`.
    Quartic,
    /// `V(u) = (4 - u²)²/4`.
    DoubleWell,
    Custom(Arc<dyn UserPotential>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Quartic => f.write_str("Quartic"),
            Potential::DoubleWell => f.write_str("DoubleWell"),
            Potential::Custom(p) => write!(f, "Custom({})", p.name()),
        }
    }
}

impl Potential {
    pub fn name(&self) -> &str {
        match self {
            Potential::Quartic => "quartic",
            Potential::DoubleWell => "double_well",
            Potential::Custom(p) => p.name(),
        }
    }

    pub fn v(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => 0.5 * u * u + 0.25 * u.powi(4),
            Potential::DoubleWell => {
                let w = 4.0 - u * u;
                0.25 * w * w
            }
            Potential::Custom(p) => p.v(u),
        }
    }

    pub fn v_prime(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => u + u * u * u,
            Potential::DoubleWell => u * u * u - 4.0 * u,
            Potential::Custom(p) => p.v_prime(u),
        }
    }

    pub fn v_double_prime(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => 1.0 + 3.0 * u * u,
            Potential::DoubleWell => 3.0 * u * u - 4.0,
            Potential::Custom(p) => p.v_double_prime(u),
        }
    }

    /// `E[V'(u + ζ)]`, `ζ ~ N(0, s)`.
    pub fn averaged_v_prime(&self, u: f64, s: f64) -> Result<f64> {
        check_variance(s)?;
        Ok(match self {
            Potential::Quartic => u + u * u * u + 3.0 * s * u,
            Potential::DoubleWell => u * u * u + 3.0 * s * u - 4.0 * u,
            Potential::Custom(p) => p
                .averaged_v_prime(u, s)
                .unwrap_or_else(|| gauss_hermite_average(|w| p.v_prime(w), u, s)),
        })
    }

    /// `E[V''(u + ζ)]`, `ζ ~ N(0, s)`.
    pub fn averaged_v_double_prime(&self, u: f64, s: f64) -> Result<f64> {
        check_variance(s)?;
        Ok(match self {
            Potential::Quartic => 1.0 + 3.0 * u * u + 3.0 * s,
            Potential::DoubleWell => 3.0 * u * u + 3.0 * s - 4.0,
            Potential::Custom(p) => p
                .averaged_v_double_prime(u, s)
                .unwrap_or_else(|| gauss_hermite_average(|w| p.v_double_prime(w), u, s)),
        })
    }

    /// `E[(V'(u + ζ))²]`, `ζ ~ N(0, s)`.
    pub fn averaged_v_prime_sq(&self, u: f64, s: f64) -> Result<f64> {
        check_variance(s)?;
        Ok(match self {
            Potential::Quartic => {
                let m = GaussianMoments::new(u, s);
                m.get(2) + 2.0 * m.get(4) + m.get(6)
            }
            Potential::DoubleWell => {
                let m = GaussianMoments::new(u, s);
                m.get(6) - 8.0 * m.get(4) + 16.0 * m.get(2)
            }
            Potential::Custom(p) => p.averaged_v_prime_sq(u, s).unwrap_or_else(|| {
                gauss_hermite_average(
                    |w| {
                        let d = p.v_prime(w);
                        d * d
                    },
                    u,
                    s,
                )
            }),
        })
    }
}

fn check_variance(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(
            "s",
            format!("variance must be finite and >= 0, got {s}"),
        ));
    }
    Ok(())
}

/// Raw moments `E[(u + ζ)^k]`, `ζ ~ N(0, s)`, for `k <= 6`.
struct GaussianMoments {
    raw: [f64; 7],
}

impl GaussianMoments {
    fn new(u: f64, s: f64) -> Self {
        // Central moments of ζ: 1, 0, s, 0, 3s², 0, 15s³.
        let central = [1.0, 0.0, s, 0.0, 3.0 * s * s, 0.0, 15.0 * s * s * s];
        let mut raw = [0.0; 7];
        for (k, slot) in raw.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for (j, c) in central.iter().enumerate().take(k + 1) {
                acc += binom * u.powi((k - j) as i32) * c;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            *slot = acc;
        }
        Self { raw }
    }

    fn get(&self, k: usize) -> f64 {
        self.raw[k]
    }
}

pub const GAUSS_HERMITE_NODES: usize = 64;

/// Nodes and weights of the physicists' Gauss–Hermite rule (weight `e^{-x²}`).
pub fn gauss_hermite_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| hermite_rule(GAUSS_HERMITE_NODES))
}

/// `E[g(u + ζ)]`, `ζ ~ N(0, s)`, by Gauss–Hermite quadrature.
pub fn gauss_hermite_average(g: impl Fn(f64) -> f64, u: f64, s: f64) -> f64 {
    if s == 0.0 {
        return g(u);
    }
    let scale = (2.0 * s).sqrt();
    let sum: f64 = gauss_hermite_rule().iter().map(|&(x, w)| w * g(u + scale * x)).sum();
    sum / std::f64::consts::PI.sqrt()
}

/// Newton iteration on the orthonormal Hermite recurrence.
fn hermite_rule(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut nodes = vec![(0.0, 0.0); n];
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0].0,
            3 => 1.91 * z - 0.91 * nodes[1].0,
            _ => 2.0 * z - nodes[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        nodes[i] = (z, w);
        nodes[n - 1 - i] = (-z, w);
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const BUILT_IN: [Potential; 2] = [Potential::Quartic, Potential::DoubleWell];

    #[test]
    fn point_values() {
        assert_eq!(Potential::Quartic.v(0.0), 0.0);
        assert_eq!(Potential::DoubleWell.v(2.0), 0.0);
        assert_eq!(Potential::DoubleWell.v(0.0), 4.0);
        assert_eq!(Potential::Quartic.v_prime(1.0), 2.0);
        assert_eq!(Potential::DoubleWell.v_prime(2.0), 0.0);
        assert_eq!(Potential::DoubleWell.v_prime(-2.0), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for p in &BUILT_IN {
            for _ in 0..200 {
                let u: f64 = rng.random_range(-5.0..5.0);
                let fd1 = (p.v(u + h) - p.v(u - h)) / (2.0 * h);
                let fd2 = (p.v_prime(u + h) - p.v_prime(u - h)) / (2.0 * h);
                // Truncation error h²/6 * |V'''| plus rounding of the differenced values.
                let tol1 = 1e-8 * (1.0 + p.v(u).abs()) / h + h * h * (1.0 + 6.0 * u.abs());
                let tol2 = 1e-8 * (1.0 + p.v_prime(u).abs()) / h + h * h * 6.0;
                assert!((fd1 - p.v_prime(u)).abs() < tol1, "{p:?} u={u}");
                assert!((fd2 - p.v_double_prime(u)).abs() < tol2, "{p:?} u={u}");
            }
        }
    }

    #[test]
    fn unit_variance_averages() {
        for x in [-1.3, 0.0, 0.4, 2.2] {
            let q = Potential::Quartic;
            let d = Potential::DoubleWell;
            assert_relative_eq!(
                q.averaged_v_prime(x, 1.0).unwrap(),
                4.0 * x + x * x * x,
                epsilon = 1e-12
            );
            assert_relative_eq!(d.averaged_v_prime(x, 1.0).unwrap(), x * x * x - x, epsilon = 1e-12);
            assert_relative_eq!(
                q.averaged_v_double_prime(x, 1.0).unwrap(),
                4.0 + 3.0 * x * x,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                d.averaged_v_double_prime(x, 1.0).unwrap(),
                3.0 * x * x - 1.0,
                epsilon = 1e-12
            );
            let x2 = x * x;
            assert_relative_eq!(
                q.averaged_v_prime_sq(x, 1.0).unwrap(),
                22.0 + 58.0 * x2 + 17.0 * x2 * x2 + x2 * x2 * x2,
                epsilon = 1e-10
            );
            assert_relative_eq!(
                d.averaged_v_prime_sq(x, 1.0).unwrap(),
                (1.0 + x2) * (7.0 + 6.0 * x2 + x2 * x2),
                epsilon = 1e-10
            );
        }
        assert_eq!(Potential::Quartic.averaged_v_prime_sq(0.0, 1.0).unwrap(), 22.0);
        assert_eq!(Potential::DoubleWell.averaged_v_prime_sq(0.0, 1.0).unwrap(), 7.0);
    }

    #[test]
    fn bridge_variance_second_derivative() {
        let t: f64 = 0.3;
        let s = t * (1.0 - t);
        let u = 0.8;
        assert_relative_eq!(
            Potential::DoubleWell.averaged_v_double_prime(u, s).unwrap(),
            3.0 * u * u + 3.0 * s - 4.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn zero_variance_reduces_to_pointwise() {
        for p in &BUILT_IN {
            for u in [-2.5, -0.1, 0.0, 1.7] {
                assert_eq!(p.averaged_v_prime(u, 0.0).unwrap(), p.v_prime(u));
                assert_eq!(p.averaged_v_double_prime(u, 0.0).unwrap(), p.v_double_prime(u));
                assert_relative_eq!(
                    p.averaged_v_prime_sq(u, 0.0).unwrap(),
                    p.v_prime(u).powi(2),
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn negative_variance_rejected() {
        for p in &BUILT_IN {
            assert!(p.averaged_v_prime(0.0, -1e-3).is_err());
            assert!(p.averaged_v_double_prime(0.0, -1.0).is_err());
            assert!(p.averaged_v_prime_sq(0.0, f64::NAN).is_err());
        }
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        let rule = gauss_hermite_rule();
        assert_eq!(rule.len(), 64);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(total, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        // E[ζ^6] for ζ ~ N(0, 0.7) is 15 * 0.343.
        let m6 = gauss_hermite_average(|w| w.powi(6), 0.0, 0.7);
        assert_relative_eq!(m6, 15.0 * 0.343, epsilon = 1e-11);
    }

    struct QuarticByQuadrature;

    impl UserPotential for QuarticByQuadrature {
        fn name(&self) -> &str {
            "quartic_quadrature"
        }
        fn v(&self, u: f64) -> f64 {
            Potential::Quartic.v(u)
        }
        fn v_prime(&self, u: f64) -> f64 {
            Potential::Quartic.v_prime(u)
        }
        fn v_double_prime(&self, u: f64) -> f64 {
            Potential::Quartic.v_double_prime(u)
        }
    }

    #[test]
    fn quadrature_route_agrees_with_closed_form() {
        let custom = Potential::Custom(Arc::new(QuarticByQuadrature));
        for (u, s) in [(0.0, 1.0), (0.7, 0.3), (-1.5, 0.25), (2.0, 0.0)] {
            assert_relative_eq!(
                custom.averaged_v_prime(u, s).unwrap(),
                Potential::Quartic.averaged_v_prime(u, s).unwrap(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                custom.averaged_v_double_prime(u, s).unwrap(),
                Potential::Quartic.averaged_v_double_prime(u, s).unwrap(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                custom.averaged_v_prime_sq(u, s).unwrap(),
                Potential::Quartic.averaged_v_prime_sq(u, s).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    struct Mc {
        mean: f64,
        se: f64,
    }

    fn monte_carlo(g: impl Fn(f64) -> f64, u: f64, s: f64, n: usize, seed: u64) -> Mc {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = s.sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let v = g(u + sd * z);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n as f64 - 1.0);
        Mc {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }

    #[test]
    fn closed_forms_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points: Vec<(f64, f64)> = vec![(0.7, 0.3)];
        for _ in 0..19 {
            points.push((rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0)));
        }
        for p in &BUILT_IN {
            for (idx, &(u, s)) in points.iter().enumerate() {
                let seed = 100 + idx as u64;
                let checks: [(f64, Mc); 3] = [
                    (
                        p.averaged_v_prime(u, s).unwrap(),
                        monte_carlo(|w| p.v_prime(w), u, s, 1_000_000, seed),
                    ),
                    (
                        p.averaged_v_double_prime(u, s).unwrap(),
                        monte_carlo(|w| p.v_double_prime(w), u, s, 1_000_000, seed),
                    ),
                    (
                        p.averaged_v_prime_sq(u, s).unwrap(),
                        monte_carlo(|w| p.v_prime(w).powi(2), u, s, 1_000_000, seed),
                    ),
                ];
                for (exact, mc) in checks {
                    assert!(
                        (exact - mc.mean).abs() <= 4.0 * mc.se + 1e-12,
                        "{p:?} u={u} s={s}: {exact} vs {} +- {}",
                        mc.mean,
                        mc.se
                    );
                }
            }
        }
    }

    #[test]
    fn averaged_derivative_is_derivative_of_average() {
        // Common random numbers make the finite difference of the MC mean of V
        // an unbiased estimate of the average of V' up to O(h²).
        let n = 200_000;
        let h = 1e-3;
        for p in &BUILT_IN {
            for &(u, s) in &[(0.3, 0.5), (-1.1, 0.2), (1.6, 0.1)] {
                let plus = monte_carlo(|w| p.v(w), u + h, s, n, 9);
                let minus = monte_carlo(|w| p.v(w), u - h, s, n, 9);
                let fd = (plus.mean - minus.mean) / (2.0 * h);
                let mc = monte_carlo(|w| p.v_prime(w), u, s, n, 9);
                let exact = p.averaged_v_prime(u, s).unwrap();
                assert!((fd - exact).abs() <= 4.0 * mc.se + 1e-4, "{p:?} {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn jensen_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in &BUILT_IN {
            for _ in 0..500 {
                let u: f64 = rng.random_range(-4.0..4.0);
                let s: f64 = rng.random_range(0.0..2.0);
                let m = p.averaged_v_prime(u, s).unwrap();
                let m2 = p.averaged_v_prime_sq(u, s).unwrap();
                assert!(m2 >= m * m - 1e-9 * m2.abs().max(1.0));
            }
        }
    }
}
