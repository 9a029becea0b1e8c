use std::ffi::CStr;
use std::ptr;

use fcopula_ffi::*;

fn exponential(rate: f64, range: f64) -> *mut FcParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { fc_params_new_exponential(rate, range, &mut p) }, FcStatus::Ok);
    p
}

fn last_error() -> String {
    let e = fc_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_str().unwrap().to_string()
}

#[test]
fn params_round_trip() {
    let p = exponential(2.0, 1.5);
    unsafe {
        assert_eq!(fc_params_rate(p), 2.0);
        assert_eq!(fc_params_range(p), 1.5);
        fc_params_free(p);
        assert!(fc_params_rate(ptr::null()).is_nan());
        fc_params_free(ptr::null_mut());
    }
}

#[test]
fn bad_rate_is_a_domain_error_with_a_message() {
    let mut p = ptr::null_mut();
    let st = unsafe { fc_params_new_exponential(-1.0, 1.0, &mut p) };
    assert_eq!(st, FcStatus::Domain);
    assert!(p.is_null());
    assert!(last_error().contains("rate"), "{}", last_error());
}

#[test]
fn null_output_is_reported() {
    let p = exponential(1.0, 1.0);
    let st = unsafe { fc_chi_limit(p, 1.0, ptr::null_mut()) };
    assert_eq!(st, FcStatus::NullPointer);
    assert!(last_error().contains("out_chi"));
    let mut x = 0.0;
    assert_eq!(unsafe { fc_chi_limit(p, 1.0, &mut x) }, FcStatus::Ok);
    assert!(fc_last_error().is_null());
    unsafe { fc_params_free(p) };
}

#[test]
fn chi_limit_matches_closed_form() {
    // λ = 1, ρ = 0.5: 2{1 - Φ(1/2)}
    let p = exponential(1.0, -1.0 / 0.5f64.ln());
    let mut chi = 0.0;
    assert_eq!(unsafe { fc_chi_limit(p, 1.0, &mut chi) }, FcStatus::Ok);
    assert!((chi - 0.617_075_077_451_973_8).abs() < 1e-12, "{chi}");
    unsafe { fc_params_free(p) };
}

#[test]
fn one_site_cdf_and_density_are_the_margin() {
    // W = Z + E/λ with λ = 1: F(0) = Φ(0) - e^{1/2} Φ(-1)
    let p = exponential(1.0, 1.0);
    let (x, y, w) = ([0.0], [0.0], [0.0]);
    let (mut v, mut e, mut ld) = (0.0, -1.0, 0.0);
    unsafe {
        assert_eq!(
            fc_joint_cdf(p, x.as_ptr(), y.as_ptr(), w.as_ptr(), 1, 1000, 4, 1, &mut v, &mut e),
            FcStatus::Ok
        );
        assert_eq!(
            fc_joint_log_density(p, x.as_ptr(), y.as_ptr(), w.as_ptr(), 1, &mut ld),
            FcStatus::Ok
        );
        fc_params_free(p);
    }
    let (phi0, phi_m1) = (0.5, 0.158_655_253_931_457_05);
    assert!((v - (phi0 - 0.5f64.exp() * phi_m1)).abs() < 1e-10, "{v}");
    assert!(e >= 0.0);
    // f(0) = e^{1/2} Φ(-1)
    assert!((ld.exp() - 0.5f64.exp() * phi_m1).abs() < 1e-10);
}

#[test]
fn simulation_handle_exposes_values() {
    let p = exponential(2.0, 1.0);
    let (x, y) = ([0.0, 1.0, 2.0], [0.0, 0.0, 0.0]);
    let mut sim = ptr::null_mut();
    let mut again = ptr::null_mut();
    unsafe {
        assert_eq!(
            fc_simulate(p, x.as_ptr(), y.as_ptr(), 3, 100, 7, &mut sim),
            FcStatus::Ok
        );
        assert_eq!(
            fc_simulate(p, x.as_ptr(), y.as_ptr(), 3, 100, 7, &mut again),
            FcStatus::Ok
        );
        let mut n = 0;
        let v = std::slice::from_raw_parts(fc_simulation_values(sim, &mut n), n);
        let mut m = 0;
        let w = std::slice::from_raw_parts(fc_simulation_values(again, &mut m), m);
        assert_eq!(n, 300);
        assert_eq!(v, w);
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(fc_simulation_values(ptr::null(), &mut n).is_null());
        assert_eq!(n, 0);
        fc_simulation_free(sim);
        fc_simulation_free(again);
        fc_params_free(p);
    }
}

#[test]
fn return_period_rejects_a_single_site() {
    let p = exponential(2.0, 1.0);
    let (x, y) = ([0.0], [0.0]);
    let mut years = 0.0;
    let st = unsafe {
        fc_return_period(
            p,
            x.as_ptr(),
            y.as_ptr(),
            1,
            0.9,
            20_000,
            18.0,
            1,
            &mut years,
            ptr::null_mut(),
        )
    };
    assert_eq!(st, FcStatus::Config);
    unsafe { fc_params_free(p) };
}

#[test]
fn return_period_inverts_the_exceedance_rate() {
    let p = exponential(2.0, 1.0);
    let (x, y) = ([0.0, 0.5], [0.0, 0.0]);
    let (mut years, mut p_hat) = (0.0, 0.0);
    let st = unsafe {
        fc_return_period(
            p,
            x.as_ptr(),
            y.as_ptr(),
            2,
            0.9,
            50_000,
            18.0,
            3,
            &mut years,
            &mut p_hat,
        )
    };
    assert_eq!(st, FcStatus::Ok);
    assert!(p_hat > 0.0 && p_hat < 0.1, "{p_hat}");
    assert!((years - 1.0 / (18.0 * p_hat)).abs() < 1e-9 * years);
    unsafe { fc_params_free(p) };
}
