use std::ffi::CStr;
use std::ptr;

use subdiff_ffi::*;

fn params() -> SdModelParams {
    SdModelParams {
        t: 3,
        n_per_unit: 2,
        dim: 1,
        alpha: 1.0,
        gamma: 2.0,
        xi: 2.0,
        zeta: 1.0,
        boundary: SdBoundary::Pinned,
    }
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { sd_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn model_lifecycle_and_exact_values() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(sd_model_new(&params(), &mut m), SdStatus::Ok);
        assert_eq!(sd_model_point_count(m), 17);
        let mut msd = 0.0;
        assert_eq!(sd_exact_msd(m, &mut msd), SdStatus::Ok);
        let mut inc = 0.0;
        assert_eq!(sd_exact_sq_increment(m, 0, 16, &mut inc), SdStatus::Ok);
        assert!(msd > 0.0 && (msd - inc).abs() < 1e-12);

        let coords = [0.0; 17];
        let mut e = -1.0;
        assert_eq!(sd_model_energy(m, coords.as_ptr(), coords.len(), &mut e), SdStatus::Ok);
        assert_eq!(e, 0.0);
        assert_eq!(sd_model_energy(m, coords.as_ptr(), 5, &mut e), SdStatus::InvalidArgument);
        sd_model_free(m);
    }
}

#[test]
fn invalid_parameters_report_message() {
    let mut p = params();
    p.gamma = 2.5;
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sd_model_new(&p, &mut m) }, SdStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("gamma"));
}

#[test]
fn null_pointers_rejected() {
    unsafe {
        assert_eq!(sd_model_new(ptr::null(), ptr::null_mut()), SdStatus::NullPointer);
        assert_eq!(sd_exact_msd(ptr::null(), ptr::null_mut()), SdStatus::NullPointer);
        assert_eq!(sd_model_point_count(ptr::null()), 0);
        sd_model_free(ptr::null_mut());
        sd_run_free(ptr::null_mut());
    }
}

#[test]
fn sampler_round_trip() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(sd_model_new(&params(), &mut m), SdStatus::Ok);
        let mp = SdMcmcParams {
            sweeps: 4000,
            burn_in: 500,
            proposal_scale: 0.5,
            shift_stride: 0,
            chains: 2,
            batches: 32,
            seed: 7,
        };
        let mut run = ptr::null_mut();
        assert_eq!(sd_sample(m, &mp, &mut run), SdStatus::Ok);
        let k = sd_run_observable_count(run);
        assert!(k >= 1);
        assert_eq!(CStr::from_ptr(sd_run_label(run, 0)).to_str().unwrap(), "msd");
        assert!(sd_run_label(run, k).is_null());
        let mut est = SdEstimate::default();
        assert_eq!(sd_run_estimate(run, 0, &mut est), SdStatus::Ok);
        let mut exact = 0.0;
        sd_exact_msd(m, &mut exact);
        assert!((est.mean - exact).abs() < 5.0 * est.std_error, "{} vs {exact}", est.mean);
        assert_eq!(sd_run_estimate(run, k, &mut est), SdStatus::InvalidArgument);
        sd_run_free(run);
        sd_model_free(m);
    }
}

#[test]
fn regime_and_fixed_point() {
    unsafe {
        let mut r = SdRegime::Diffusive;
        assert_eq!(sd_regime(1.0, 2.25, &mut r), SdStatus::Ok);
        assert_eq!(r, SdRegime::Subdiffusive);
        assert_eq!(sd_regime(2.5, 1.0, &mut r), SdStatus::InvalidArgument);
        let (mut v, mut e) = (0.0, 0.0);
        assert_eq!(sd_fixed_point_iterate(1.0, 0.5, 3, &mut v, &mut e), SdStatus::Ok);
        assert_eq!(v, 1.875);
        assert_eq!(e, 0.125);
        assert_eq!(sd_fixed_point_iterate(1.0, 1.0, 3, &mut v, &mut e), SdStatus::InvalidArgument);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(sd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
