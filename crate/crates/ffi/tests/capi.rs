use std::ffi::{CStr, CString};
use std::ptr;

use geoflow_ffi::*;

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    gf_string_free(p);
    s
}

unsafe fn cosine(k: i32, l: i32, amp: f64, mean: f64) -> *mut GfField {
    let mut f = ptr::null_mut();
    let tau = std::f64::consts::TAU;
    assert_eq!(gf_field_cosine(tau, tau, 16, k, l, amp, mean, &mut f), GfStatus::Ok);
    f
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn liouville_cascade_through_handles() {
    unsafe {
        let v = cosine(1, 0, 1.0, 1.25);
        let w = cosine(0, 1, 1.0, 1.25);
        let mut g = ptr::null_mut();
        assert_eq!(gf_field_add(v, w, &mut g), GfStatus::Ok);

        let mut report = ptr::null_mut();
        assert_eq!(gf_cascade_run(g, 2, 1.0, 1.0, 0.0, &mut report), GfStatus::Ok);
        let (mut verdict, mut step) = (GfVerdict::RealityFailed, 99);
        assert_eq!(gf_cascade_verdict(report, &mut verdict, &mut step), GfStatus::Ok);
        assert_eq!(verdict, GfVerdict::IntegralFound);
        assert!(gf_cascade_closing_norm(report) < 1e-12);

        let mut a0 = ptr::null_mut();
        assert_eq!(gf_cascade_coefficient(report, 0, &mut a0), GfStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(gf_field_evaluate(a0, 0.0, 0.0, &mut re, &mut im), GfStatus::Ok);
        // a_0 = −E(cos x − cos y) at the origin.
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(gf_cascade_report_json(report, &mut json), GfStatus::Ok);
        assert!(take_string(json).contains("integral_found"));

        gf_field_free(a0);
        gf_cascade_report_free(report);
        for f in [v, w, g] {
            gf_field_free(f);
        }
    }
}

#[test]
fn generic_metric_fails_reality_for_degree_three() {
    unsafe {
        let g = cosine(1, 1, 1.0, 2.0);
        let mut report = ptr::null_mut();
        assert_eq!(gf_cascade_run(g, 3, 1.0, 1.0, 0.0, &mut report), GfStatus::Ok);
        let (mut verdict, mut step) = (GfVerdict::IntegralFound, 0);
        gf_cascade_verdict(report, &mut verdict, &mut step);
        assert_eq!(verdict, GfVerdict::RealityFailed);
        gf_cascade_report_free(report);
        gf_field_free(g);
    }
}

#[test]
fn json_round_trip() {
    unsafe {
        let f = cosine(2, -1, 0.5, 1.0);
        let mut json = ptr::null_mut();
        assert_eq!(gf_field_to_json(f, &mut json), GfStatus::Ok);
        let text = CString::new(take_string(json)).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(gf_field_from_json(text.as_ptr(), &mut back), GfStatus::Ok);
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        gf_field_evaluate(f, 0.3, 0.8, &mut a, &mut b);
        gf_field_evaluate(back, 0.3, 0.8, &mut c, &mut d);
        assert_eq!((a, b), (c, d));
        gf_field_free(f);
        gf_field_free(back);
    }
}

#[test]
fn flat_trajectory() {
    unsafe {
        let g = cosine(0, 0, 1.0, 0.0);
        let state = [0.0, 0.0, 1.0, 1.0];
        let mut traj = ptr::null_mut();
        assert_eq!(gf_simulate(g, ptr::null(), state.as_ptr(), 10.0, 1e-10, 1e-10, 20, &mut traj), GfStatus::Ok);
        assert_eq!(gf_trajectory_len(traj), 21);
        let mut row = [0.0; 6];
        assert_eq!(gf_trajectory_sample(traj, 20, row.as_mut_ptr()), GfStatus::Ok);
        assert!((row[0] - 10.0).abs() < 1e-12);
        assert!((row[1] - 10.0 % std::f64::consts::TAU).abs() < 1e-9);
        assert!(gf_trajectory_energy_drift(traj) < 1e-12);
        assert_eq!(gf_trajectory_sample(traj, 21, row.as_mut_ptr()), GfStatus::InvalidInput);
        let mut csv = ptr::null_mut();
        assert_eq!(gf_trajectory_csv(traj, &mut csv), GfStatus::Ok);
        assert!(take_string(csv).starts_with("t,x,y,px,py,H\n"));
        gf_trajectory_free(traj);
        gf_field_free(g);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(gf_field_cosine(1.0, 1.0, 2, 5, 0, 1.0, 0.0, &mut f), GfStatus::InvalidInput);
        assert!(f.is_null());
        assert!(take_string(gf_last_error_message()).contains("band limit"));

        let g = cosine(1, 0, 1.0, 0.5);
        let mut report = ptr::null_mut();
        assert_eq!(gf_cascade_run(g, 2, 1.0, 1.0, 0.0, &mut report), GfStatus::Metric);
        assert_eq!(gf_cascade_run(ptr::null(), 2, 1.0, 1.0, 0.0, &mut report), GfStatus::NullPointer);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(gf_field_from_json(bad.as_ptr(), &mut f), GfStatus::InvalidInput);
        assert_eq!(gf_trajectory_len(ptr::null()), 0);
        gf_field_free(g);
        gf_field_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/geoflow.h")).unwrap();
    for name in [
        "gf_version",
        "gf_last_error_message",
        "gf_string_free",
        "gf_field_from_json",
        "gf_field_cosine",
        "gf_field_add",
        "gf_field_evaluate",
        "gf_field_to_json",
        "gf_field_free",
        "gf_cascade_run",
        "gf_cascade_verdict",
        "gf_cascade_closing_norm",
        "gf_cascade_coefficient",
        "gf_cascade_report_json",
        "gf_cascade_report_free",
        "gf_simulate",
        "gf_trajectory_len",
        "gf_trajectory_sample",
        "gf_trajectory_energy_drift",
        "gf_trajectory_csv",
        "gf_trajectory_free",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct GfField GfField;"));
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{dir}/include"))
        .arg(format!("{dir}/examples/smoke.c"))
        .status()
    else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(status.success());
}
