mod common;

use common::Moments;
use rmfit::objective::potential_energy;
use rmfit::{
    apply_c0_inverse, draw_noise, drift, inner_l2, kl_estimate, noisy_oracle, oracle_with_noise, Grid, PathVector,
    Potential, ProblemSpec, State,
};

const DRAWS: usize = 100_000;

#[test]
fn scalar_oracle_is_unbiased() {
    for (pot, eps) in [
        (Potential::Quartic, 0.1),
        (Potential::DoubleWell, 0.1),
        (Potential::DoubleWell, 1.0),
    ] {
        let spec = ProblemSpec::scalar(pot.clone(), eps).unwrap();
        for (k, x) in [-1.5, -0.3, 0.0, 0.7, 2.0].into_iter().enumerate() {
            let x = State::scalar(x).unwrap();
            let mut sampler = spec.sampler(100 + k as u64);
            let mut m = Moments::default();
            for _ in 0..DRAWS {
                m.push(noisy_oracle(&spec, &x, &mut sampler).unwrap().as_scalar().unwrap());
            }
            let exact = drift(&spec, &x).unwrap().as_scalar().unwrap();
            assert!(m.z(exact) < 4.0, "{pot:?} x={x:?}: MC {} vs {exact}", m.mean());
        }
    }
}

#[test]
fn path_oracle_is_unbiased() {
    let grid = Grid::new(49).unwrap();
    let states = [
        PathVector::zeros(grid),
        PathVector::from_fn(grid, |t| (std::f64::consts::PI * t).sin()),
        PathVector::from_fn(grid, |t| -2.0 * t * (1.0 - t)),
        PathVector::from_fn(grid, |t| 2.0 * (t / 0.1).tanh() / (10.0f64).tanh() - 2.0 * t),
        PathVector::from_fn(grid, |t| 0.5 * (3.0 * std::f64::consts::PI * t).sin()),
    ];
    for pot in [Potential::Quartic, Potential::DoubleWell] {
        let spec = ProblemSpec::path(pot.clone(), 0.01, grid, 0.0, 2.0).unwrap();
        for (k, x) in states.iter().enumerate() {
            let x = State::Path(x.clone());
            let exact = drift(&spec, &x).unwrap();
            let exact = exact.as_path().unwrap().values();
            let nodes = [9, 24, 39];
            let mut m: Vec<Moments> = vec![Moments::default(); nodes.len()];
            let mut sampler = spec.sampler(200 + k as u64);
            for _ in 0..DRAWS {
                let f = noisy_oracle(&spec, &x, &mut sampler).unwrap();
                let f = f.as_path().unwrap().values();
                for (acc, &i) in m.iter_mut().zip(&nodes) {
                    acc.push(f[i]);
                }
            }
            for (acc, &i) in m.iter().zip(&nodes) {
                assert!(
                    acc.z(exact[i]) < 4.0,
                    "{pot:?} state {k} node {i}: {} vs {}",
                    acc.mean(),
                    exact[i]
                );
            }
        }
    }
}

fn h1_inner(u: &PathVector, v: &PathVector) -> f64 {
    inner_l2(&apply_c0_inverse(u), v).unwrap()
}

#[test]
fn oracle_is_gradient_of_kl_estimate() {
    // With common random numbers the finite difference of the estimate is the
    // H¹ pairing of the sample-mean oracle with the direction.
    let grid = Grid::new(39).unwrap();
    let spec = ProblemSpec::path(Potential::DoubleWell, 0.05, grid, 0.0, 2.0).unwrap();
    let x = PathVector::from_fn(grid, |t| 0.3 * (std::f64::consts::PI * t).sin());
    let h = PathVector::from_fn(grid, |t| t * (1.0 - t) * (1.0 + t));
    let (seed, n) = (5, 4000);

    let mut sampler = spec.sampler(seed);
    let mut mean_f = PathVector::zeros(grid);
    for _ in 0..n {
        let f = noisy_oracle(&spec, &State::Path(x.clone()), &mut sampler).unwrap();
        mean_f = mean_f.add_scaled(1.0 / n as f64, f.as_path().unwrap()).unwrap();
    }
    let analytic = h1_inner(&mean_f, &h);

    let delta = 1e-4;
    let kl = |alpha: f64| {
        let xa = State::Path(x.add_scaled(alpha, &h).unwrap());
        kl_estimate(&spec, &xa, &mut spec.sampler(seed), n).unwrap()
    };
    let fd = (kl(delta) - kl(-delta)) / (2.0 * delta);
    assert!(
        (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0),
        "{fd} vs {analytic}"
    );

    // The exact drift pairs the same way with the exact objective; the MC
    // version above sits within sampling error of it.
    let exact = h1_inner(drift(&spec, &State::Path(x.clone())).unwrap().as_path().unwrap(), &h);
    assert!(
        (exact - analytic).abs() < 0.05 * exact.abs().max(1.0),
        "{exact} vs {analytic}"
    );
}

#[test]
fn scalar_kl_values() {
    // E[V(ξ)] for the quartic is 1/2 + 3/4, scaled by 1/ε = 10.
    let quartic = ProblemSpec::scalar(Potential::Quartic, 0.1).unwrap();
    let mut m = Moments::default();
    let mut sampler = quartic.sampler(3);
    for _ in 0..DRAWS {
        let noise = draw_noise(&quartic, &mut sampler).unwrap();
        m.push(potential_energy(&quartic, &State::scalar(0.0).unwrap(), &noise).unwrap());
    }
    assert!(m.z(12.5) < 3.0, "{}", m.mean());

    let dw = ProblemSpec::scalar(Potential::DoubleWell, 0.1).unwrap();
    let kl = |x: f64| kl_estimate(&dw, &State::scalar(x).unwrap(), &mut dw.sampler(4), DRAWS).unwrap();
    assert!(kl(0.9f64.sqrt()) < kl(0.0));
    assert!(kl(0.9f64.sqrt()) < kl(-0.5));
}

#[test]
fn kl_estimate_decomposes() {
    // J(x) - log Z = E Φ(x + m0 + ξ) + ½‖x‖²_{H¹}, sample by sample.
    let grid = Grid::new(19).unwrap();
    let spec = ProblemSpec::path(Potential::Quartic, 0.1, grid, 0.0, 1.0).unwrap();
    let x = PathVector::from_fn(grid, |t| t * (1.0 - t));
    let state = State::Path(x.clone());
    let n = 50;
    let mut sampler = spec.sampler(8);
    let mut phi = 0.0;
    for _ in 0..n {
        let noise = draw_noise(&spec, &mut sampler).unwrap();
        phi += potential_energy(&spec, &state, &noise).unwrap();
    }
    let expected = phi / n as f64 + 0.5 * rmfit::norm_h1(&x).powi(2);
    let got = kl_estimate(&spec, &state, &mut spec.sampler(8), n).unwrap();
    assert!((got - expected).abs() < 1e-12 * expected.abs());
}

#[test]
fn oracle_second_moment_grows_at_most_polynomially() {
    // E‖F(x,ξ)‖² stays below K(1 + ‖x‖^6) for the quartic, whose V' is cubic.
    let spec = ProblemSpec::scalar(Potential::Quartic, 0.1).unwrap();
    let mut ratios = Vec::new();
    for x in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut sampler = spec.sampler(9);
        let state = State::scalar(x).unwrap();
        let mut m = 0.0;
        for _ in 0..20_000 {
            let noise = draw_noise(&spec, &mut sampler).unwrap();
            m += oracle_with_noise(&spec, &state, &noise)
                .unwrap()
                .as_scalar()
                .unwrap()
                .powi(2);
        }
        ratios.push(m / 20_000.0 / (1.0 + x.powi(6)));
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(max < 1e4, "{ratios:?}");
    // F ≈ ε⁻¹ (x + ξ)³ for large x, so the ratio tends to ε⁻² = 100 from
    // above with a leading correction 15/x² + 2/x² from E ξ² and the linear term.
    let leading = 100.0 * (1.0 + 17.0 / 256.0);
    assert!((ratios[5] - leading).abs() < 0.03 * leading, "{ratios:?}");
}
