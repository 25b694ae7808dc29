use std::ffi::{CStr, CString};
use std::ptr;

use fractal_fourier_ffi::*;

const CANTOR: &str = r#"{"ambient_dim": 1, "maps": [
    {"ratio": "1/3", "translation": [0]},
    {"ratio": "1/3", "translation": ["2/3"]}
], "weights": "natural", "declared_separation": "SSC"}"#;

fn last_error() -> String {
    let p = ff_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cantor() -> *mut FfIfs {
    let json = CString::new(CANTOR).unwrap();
    let mut ifs = ptr::null_mut();
    assert_eq!(unsafe { ff_ifs_from_json(json.as_ptr(), &mut ifs) }, FfStatus::Ok, "{}", last_error());
    ifs
}

#[test]
fn cantor_dimension_and_transform() {
    let ifs = cantor();
    unsafe {
        assert_eq!(ff_ifs_ambient_dim(ifs), 1);
        let mut s = 0.0;
        assert_eq!(ff_similarity_dimension(ifs, &mut s), FfStatus::Ok);
        assert!((s - 2f64.ln() / 3f64.ln()).abs() < 1e-12);

        // Infinite-product form of the middle-thirds transform.
        let xi = 7.25;
        let mut expect = num_complex::Complex64::from_polar(1.0, -std::f64::consts::PI * xi);
        for j in 1..60 {
            expect *= (std::f64::consts::PI * xi * 2.0 / 3f64.powi(j)).cos();
        }
        let mut out = FfSample::default();
        assert_eq!(ff_mu_hat(ifs, &xi, 1, 1e-9, 0, &mut out), FfStatus::Ok);
        assert!(out.error_bound <= 1e-9);
        assert!((out.re - expect.re).hypot(out.im - expect.im) <= out.error_bound + 1e-15);
        assert!(out.certified);
        ff_ifs_free(ifs);
    }
}

#[test]
fn profile_and_decay_exponent() {
    let ifs = cantor();
    unsafe {
        let mut profile = ptr::null_mut();
        assert_eq!(ff_profile_build(ifs, ptr::null(), &mut profile), FfStatus::Ok);
        let mut summary = FfProfileSummary::default();
        assert_eq!(ff_profile_get(profile, &mut summary), FfStatus::Ok);
        assert!(summary.ad_regular);
        assert_eq!(summary.k, 1);
        let s = 2f64.ln() / 3f64.ln();
        assert!((summary.kappa2 - s).abs() < 1e-9);

        let mut bound = FfDecayBound::default();
        assert_eq!(ff_decay_exponent(profile, &mut bound), FfStatus::Ok);
        assert!(bound.sigma > 0.0 && bound.sigma < s / 2.0);
        assert!(bound.gamma.is_finite());
        ff_profile_free(profile);
        ff_ifs_free(ifs);
    }
}

#[test]
fn inconsistent_profile_is_reported() {
    let mut profile = ptr::null_mut();
    // κ₂ above κ* violates the ordering.
    let status = unsafe { ff_profile_manual(1, 0.9, 0.5, 0.4, &mut profile) };
    assert_eq!(status, FfStatus::InconsistentProfile);
    assert!(profile.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn pushforward_under_square() {
    let ifs = cantor();
    let spec = CString::new(r#"{"kind": "square"}"#).unwrap();
    unsafe {
        let mut map = ptr::null_mut();
        assert_eq!(ff_map_from_json(spec.as_ptr(), 1, &mut map), FfStatus::Ok, "{}", last_error());
        let mut out = FfSample::default();
        let xi = 40.0;
        assert_eq!(ff_pushforward_hat(ifs, map, &xi, 1, 1e-5, 0, &mut out), FfStatus::Ok);
        assert!(out.error_bound <= 1e-5);
        assert!(out.re.hypot(out.im) <= 1.0 + out.error_bound);
        ff_map_free(map);
        ff_ifs_free(ifs);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut ifs = ptr::null_mut();
        assert_eq!(ff_ifs_from_json(ptr::null(), &mut ifs), FfStatus::InvalidArgument);
        assert!(last_error().contains("json"));

        let bad = CString::new(r#"{"ambient_dim": 1, "maps": []}"#).unwrap();
        assert_eq!(ff_ifs_from_json(bad.as_ptr(), &mut ifs), FfStatus::ConfigInvalid);
        assert!(ifs.is_null());

        let ifs = cantor();
        let xi = [1.0, 2.0];
        let mut out = FfSample::default();
        assert_eq!(ff_mu_hat(ifs, xi.as_ptr(), 2, 1e-6, 0, &mut out), FfStatus::ConfigInvalid);
        assert_eq!(ff_mu_hat(ifs, xi.as_ptr(), 1, 1e-6, 0, ptr::null_mut()), FfStatus::InvalidArgument);

        let uniform = CString::new(r#"{"ambient_dim": 1, "maps": [
            {"ratio": 0.5, "translation": [0]}, {"ratio": 0.5, "translation": [0.5]}]}"#)
        .unwrap();
        let mut u = ptr::null_mut();
        assert_eq!(ff_ifs_from_json(uniform.as_ptr(), &mut u), FfStatus::Ok);
        let far = 5000.0;
        assert_eq!(ff_mu_hat(u, &far, 1, 1e-9, 10, &mut out), FfStatus::ResourceExceeded);
        ff_ifs_free(u);
        ff_ifs_free(ifs);
        ff_ifs_free(ptr::null_mut());
    }
}

#[test]
fn conditions_and_thresholds() {
    unsafe {
        let (mut t2, mut t3) = (0.0, 0.0);
        assert_eq!(ff_symmetric_thresholds(&mut t2, &mut t3), FfStatus::Ok);
        assert!(0.5 < t2 && t2 < t3 && t3 < 1.0);

        let mut c = FfCondition::default();
        assert_eq!(ff_two_set_condition(t2 + 0.01, t2 + 0.01, &mut c), FfStatus::Ok);
        assert!(c.holds && c.margin > 0.0);
        assert_eq!(ff_two_set_condition(t2 - 0.01, t2 - 0.01, &mut c), FfStatus::Ok);
        assert!(!c.holds);
        assert_eq!(ff_three_set_condition(t3 + 0.01, t3 + 0.01, t3 + 0.01, &mut c), FfStatus::Ok);
        assert!(c.holds);
        assert_eq!(ff_measure_product_condition(0.95, 0.95, true, &mut c), FfStatus::Ok);
        assert!(c.holds);
        assert_eq!(ff_high_dim_condition(6, 5.5, &mut c), FfStatus::Ok);
        assert!(c.holds && (c.margin - 0.5).abs() < 1e-12);
        assert_eq!(ff_high_dim_condition(2, 1.9, &mut c), FfStatus::ConfigInvalid);
        assert_eq!(ff_two_set_condition(1.5, 0.5, &mut c), FfStatus::ConfigInvalid);

        let mut sigma = 0.0;
        assert_eq!(ff_log_pushforward_sigma(0.8, &mut sigma), FfStatus::Ok);
        assert!(sigma > 0.0);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fractal_fourier.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
