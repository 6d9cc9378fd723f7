use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use robust_gan_ffi::*;

fn last_error() -> String {
    let p = rg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(rg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_round_trip_and_nulls() {
    let pts = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(rg_dataset_new(pts.as_ptr(), 3, 2, ptr::null(), &mut ds), RgStatus::Ok);
        assert_eq!(rg_dataset_rows(ds), 3);
        assert_eq!(rg_dataset_dim(ds), 2);
        rg_dataset_free(ds);

        let mut other = ptr::null_mut();
        assert_eq!(rg_dataset_new(ptr::null(), 3, 2, ptr::null(), &mut other), RgStatus::NullPointer);
        assert!(last_error().contains("points"));
        assert!(other.is_null());
        assert_eq!(rg_dataset_rows(ptr::null()), 0);
        rg_dataset_free(ptr::null_mut());
    }
}

#[test]
fn non_finite_points_are_rejected() {
    let pts = [1.0, f64::NAN];
    let mut ds = ptr::null_mut();
    let status = unsafe { rg_dataset_new(pts.as_ptr(), 2, 1, ptr::null(), &mut ds) };
    assert_eq!(status, RgStatus::InvalidArgument);
    assert!(ds.is_null());
}

#[test]
fn robust_mean_ignores_far_outliers() {
    unsafe {
        let mut clean = ptr::null_mut();
        assert_eq!(rg_dataset_sample_gaussian(500, 3, 1.0, 11, &mut clean), RgStatus::Ok);
        let mut dirty = ptr::null_mut();
        assert_eq!(rg_dataset_corrupt_point_mass(clean, 0.1, 50.0, 12, &mut dirty), RgStatus::Ok);

        let mut cfg = ptr::null_mut();
        assert_eq!(rg_config_new(&mut cfg), RgStatus::Ok);
        assert_eq!(rg_config_set_outer_steps(cfg, 60), RgStatus::Ok);
        assert_eq!(rg_config_set_eps(cfg, 0.1), RgStatus::Ok);
        assert_eq!(rg_config_set_distance(cfg, RgDistance::A1), RgStatus::Ok);
        assert_eq!(rg_config_set_seed(cfg, 3), RgStatus::Ok);

        let mut est = ptr::null_mut();
        assert_eq!(rg_robust_mean(dirty, cfg, &mut est), RgStatus::Ok);
        assert_eq!(rg_estimate_len(est), 3);
        let mut buf = [0.0; 3];
        assert_eq!(rg_estimate_copy(est, buf.as_mut_ptr(), 3), RgStatus::Ok);
        let err = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1.0, "error {err}");
        assert!(rg_estimate_distance_value(est).is_finite());

        let mut short = [0.0; 2];
        assert_eq!(rg_estimate_copy(est, short.as_mut_ptr(), 2), RgStatus::InvalidArgument);

        let mut v = f64::NAN;
        assert_eq!(rg_distance(RgDistance::A1, clean, dirty, 5, &mut v), RgStatus::Ok);
        assert!(v > 0.0 && v <= 1.0, "{v}");

        rg_estimate_free(est);
        rg_config_free(cfg);
        rg_dataset_free(dirty);
        rg_dataset_free(clean);
    }
}

#[test]
fn second_moment_is_row_major_square() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(rg_dataset_sample_gaussian(300, 2, 1.0, 4, &mut ds), RgStatus::Ok);
        let mut cfg = ptr::null_mut();
        rg_config_new(&mut cfg);
        rg_config_set_outer_steps(cfg, 20);
        let mut est = ptr::null_mut();
        assert_eq!(rg_robust_second_moment(ds, cfg, &mut est), RgStatus::Ok);
        assert_eq!(rg_estimate_len(est), 4);
        let mut m = [0.0; 4];
        rg_estimate_copy(est, m.as_mut_ptr(), 4);
        assert!((m[1] - m[2]).abs() < 1e-9);
        rg_estimate_free(est);
        rg_config_free(cfg);
        rg_dataset_free(ds);
    }
}

#[test]
fn regression_without_responses_fails_cleanly() {
    unsafe {
        let mut ds = ptr::null_mut();
        rg_dataset_sample_gaussian(50, 2, 1.0, 1, &mut ds);
        let mut cfg = ptr::null_mut();
        rg_config_new(&mut cfg);
        let mut est = ptr::null_mut();
        let status = rg_robust_regression(ds, cfg, &mut est);
        assert_ne!(status, RgStatus::Ok);
        assert_ne!(status, RgStatus::Panic);
        assert!(est.is_null());
        assert!(!last_error().is_empty());
        rg_config_free(cfg);
        rg_dataset_free(ds);
    }
}

#[test]
fn config_from_toml() {
    let good = CString::new("outer_steps = 40\ndistance = \"A2\"\neps = 0.05\n").unwrap();
    let bad = CString::new("outer_stepz = 40\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(rg_config_from_toml(good.as_ptr(), &mut cfg), RgStatus::Ok);
        rg_config_free(cfg);
        cfg = ptr::null_mut();
        assert_eq!(rg_config_from_toml(bad.as_ptr(), &mut cfg), RgStatus::Config);
        assert!(cfg.is_null());
        let mut c = ptr::null_mut();
        rg_config_new(&mut c);
        assert_eq!(rg_config_set_eps(c, 0.9), RgStatus::InvalidArgument);
        assert_eq!(rg_config_set_outer_steps(c, 0), RgStatus::InvalidArgument);
        rg_config_free(c);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/robust_gan.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for name in ["rg_robust_mean", "rg_last_error_message", "RG_STATUS_OK", "typedef struct RgDataset RgDataset"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"]).arg(&header).output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
