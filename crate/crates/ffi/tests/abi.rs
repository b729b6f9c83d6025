use std::ffi::CStr;
use std::ptr;

use rmfit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rmfit_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn path_problem(pot: RmfitPotential, n: usize) -> *mut RmfitProblem {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { rmfit_problem_new_path(pot, 0.01, n, 0.0, 2.0, &mut p) },
        RmfitStatus::Ok
    );
    p
}

#[test]
fn scalar_drift_and_oracle() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            rmfit_problem_new_scalar(RmfitPotential::DoubleWell, 0.1, &mut p),
            RmfitStatus::Ok
        );
        assert_eq!(rmfit_problem_state_len(p), 1);
        let x = [0.9f64.sqrt()];
        let mut f = [f64::NAN];
        assert_eq!(rmfit_drift(p, x.as_ptr(), 1, f.as_mut_ptr()), RmfitStatus::Ok);
        assert!(f[0].abs() < 1e-12, "{}", f[0]);

        let mut s = ptr::null_mut();
        assert_eq!(rmfit_sampler_new(p, 3, &mut s), RmfitStatus::Ok);
        let mut sum = 0.0;
        let n = 20_000;
        for _ in 0..n {
            assert_eq!(rmfit_noisy_oracle(p, s, x.as_ptr(), 1, f.as_mut_ptr()), RmfitStatus::Ok);
            sum += f[0];
        }
        assert!((sum / n as f64).abs() < 1.0);
        rmfit_sampler_free(s);
        rmfit_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            rmfit_problem_new_scalar(RmfitPotential::Quartic, -1.0, &mut p),
            RmfitStatus::InvalidArgument
        );
        assert!(p.is_null());
        assert!(last_error().contains("eps"), "{}", last_error());

        assert_eq!(
            rmfit_problem_new_scalar(RmfitPotential::Quartic, 1.0, ptr::null_mut()),
            RmfitStatus::NullPointer
        );

        let path = path_problem(RmfitPotential::Quartic, 9);
        let x = [0.0; 5];
        let mut out = [0.0; 5];
        assert_eq!(
            rmfit_drift(path, x.as_ptr(), 5, out.as_mut_ptr()),
            RmfitStatus::GridMismatch
        );
        assert_eq!(
            rmfit_drift(ptr::null(), x.as_ptr(), 5, out.as_mut_ptr()),
            RmfitStatus::NullPointer
        );

        let mut scalar = ptr::null_mut();
        rmfit_problem_new_scalar(RmfitPotential::Quartic, 1.0, &mut scalar);
        let mut eig = [0.0];
        assert_eq!(
            rmfit_schrodinger_eigs(scalar, x.as_ptr(), 1, 1, eig.as_mut_ptr()),
            RmfitStatus::ModeMismatch
        );
        rmfit_problem_free(scalar);
        rmfit_problem_free(path);
        // Freeing null is a no-op.
        rmfit_problem_free(ptr::null_mut());
        rmfit_run_free(ptr::null_mut());
    }
}

#[test]
fn bvp_and_spectrum() {
    unsafe {
        let n = 200;
        let p = path_problem(RmfitPotential::DoubleWell, n);
        // Kink initial guess 2 tanh(t/0.1)/tanh(10) minus the interpolant 2t.
        let init: Vec<f64> = (1..=n)
            .map(|i| {
                let t = i as f64 / (n + 1) as f64;
                2.0 * (t / 0.1).tanh() / 10f64.tanh() - 2.0 * t
            })
            .collect();
        let mut x = vec![0.0; n];
        let (mut residual, mut iters) = (0.0, 0usize);
        let status = rmfit_bvp_solve(
            p,
            init.as_ptr(),
            n,
            1e-10,
            100,
            x.as_mut_ptr(),
            &mut residual,
            &mut iters,
        );
        assert_eq!(status, RmfitStatus::Ok, "{}", last_error());
        assert!(residual <= 1e-10);
        let mut eigs = [0.0; 3];
        assert_eq!(
            rmfit_schrodinger_eigs(p, x.as_ptr(), n, 3, eigs.as_mut_ptr()),
            RmfitStatus::Ok
        );
        assert!((eigs[0] - 550.0).abs() < 55.0, "{eigs:?}");

        let status = rmfit_bvp_solve(p, init.as_ptr(), n, 1e-10, 1, x.as_mut_ptr(), &mut residual, &mut iters);
        assert_eq!(status, RmfitStatus::NotConverged);
        assert!(residual > 1e-10 && iters == 1);
        rmfit_problem_free(p);
    }
}

#[test]
fn rm_run_through_abi() {
    unsafe {
        let mut p = ptr::null_mut();
        rmfit_problem_new_scalar(RmfitPotential::Quartic, 0.1, &mut p);
        let region = RmfitRegion {
            shape: RmfitRegionShape::Interval,
            lo: -1.0,
            hi: 1.0,
            radius: 0.0,
            growth: 1.0,
        };
        let schedule = RmfitSchedule {
            a0: 1.0,
            n0: 10.0,
            gamma: 1.0,
        };
        let restart = [0.5];
        let mut run = ptr::null_mut();
        let status = rmfit_run(
            p,
            RmfitPolicyKind::Expanding,
            &region,
            restart.as_ptr(),
            ptr::null(),
            1,
            &schedule,
            100_000,
            1,
            1000,
            1_000_000,
            &mut run,
        );
        assert_eq!(status, RmfitStatus::Ok, "{}", last_error());
        let mut x = [f64::NAN];
        assert_eq!(rmfit_run_final_state(run, x.as_mut_ptr(), 1), RmfitStatus::Ok);
        assert!(x[0].abs() < 0.05);
        assert_eq!(rmfit_run_iterations(run), 100_000);
        assert_eq!(rmfit_run_record_count(run), 100);
        let mut rec = RmfitRecord {
            n: 0,
            sigma: 0,
            step_size: 0.0,
            truncated: false,
            non_finite: false,
            norm_x: 0.0,
        };
        assert_eq!(rmfit_run_record(run, 99, &mut rec), RmfitStatus::Ok);
        assert_eq!(rec.n, 100_000);
        assert_eq!(rec.sigma, rmfit_run_truncations(run));
        assert_eq!(rmfit_run_record(run, 100, &mut rec), RmfitStatus::InvalidArgument);
        rmfit_run_free(run);

        let bad = RmfitSchedule { gamma: 0.4, ..schedule };
        let status = rmfit_run(
            p,
            RmfitPolicyKind::Fixed,
            &RmfitRegion { growth: 0.0, ..region },
            restart.as_ptr(),
            ptr::null(),
            1,
            &bad,
            10,
            1,
            1,
            10,
            &mut run,
        );
        assert_eq!(status, RmfitStatus::InvalidArgument);
        assert!(last_error().contains("gamma"));
        let far = [3.0];
        let status = rmfit_run(
            p,
            RmfitPolicyKind::Fixed,
            &RmfitRegion { growth: 0.0, ..region },
            far.as_ptr(),
            ptr::null(),
            1,
            &schedule,
            10,
            1,
            1,
            10,
            &mut run,
        );
        assert_eq!(status, RmfitStatus::RestartOutsideRegion);
        rmfit_problem_free(p);
    }
}
