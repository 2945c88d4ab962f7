use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use dampwave_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dw_last_error()) }.to_str().unwrap().to_string()
}

fn periodic(gamma: f64, dims: usize) -> *mut DwDamping {
    let center = vec![0.0; dims];
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dw_damping_periodic_power(gamma, center.as_ptr(), dims, &mut d) }, DwStatus::Ok);
    d
}

fn circle(modes: usize) -> *mut DwGrid {
    let mut g = ptr::null_mut();
    let status = unsafe {
        dw_grid_new(1, 0, &modes, &(2.0 * std::f64::consts::PI), &DwAxisKind::Periodic, &mut g)
    };
    assert_eq!(status, DwStatus::Ok);
    g
}

#[test]
fn damping_handle_evaluates() {
    let d = periodic(1.0, 1);
    let mut value = 0.0;
    let x = [std::f64::consts::PI];
    assert_eq!(unsafe { dw_damping_eval(d, x.as_ptr(), 1, &mut value) }, DwStatus::Ok);
    assert!((value - 4.0).abs() < 1e-14);
    assert_eq!(unsafe { dw_damping_eval(d, x.as_ptr(), 0, &mut value) }, DwStatus::InvalidArgument);
    unsafe { dw_damping_free(d) };
}

#[test]
fn invalid_arguments_set_the_error_message() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dw_damping_constant(-1.0, &mut d) }, DwStatus::InvalidArgument);
    assert!(d.is_null());
    assert!(last_error().contains("nonnegative"));
    assert_eq!(unsafe { dw_damping_constant(1.0, ptr::null_mut()) }, DwStatus::NullPointer);
    assert_eq!(unsafe { dw_damping_periodic_power(1.0, ptr::null(), 2, &mut d) }, DwStatus::NullPointer);
    let modes = [0usize];
    let mut g = ptr::null_mut();
    let status = unsafe { dw_grid_new(1, 0, modes.as_ptr(), &1.0, &DwAxisKind::Periodic, &mut g) };
    assert_eq!(status, DwStatus::InvalidArgument);
    unsafe {
        dw_damping_free(ptr::null_mut());
        dw_grid_free(ptr::null_mut());
    }
    assert_eq!(unsafe { dw_grid_len(ptr::null()) }, 0);
}

#[test]
fn sigma_min_through_handles() {
    let d = periodic(1.0, 1);
    let g = circle(128);
    assert_eq!(unsafe { dw_grid_len(g) }, 128);
    let params = DwOperatorParams { family: DwFamily::Model, lambda: 0.0, omega: 0.0, mu: 100.0, tolerance: 0.0, seed: 7 };
    let mut sigma = 0.0;
    assert_eq!(unsafe { dw_sigma_min(d, g, &params, &mut sigma) }, DwStatus::InvalidArgument);
    assert!(last_error().contains("truncated-box"));
    let params = DwOperatorParams { family: DwFamily::Reduced, lambda: 20.0, omega: 0.0, ..params };
    assert_eq!(unsafe { dw_sigma_min(d, g, &params, &mut sigma) }, DwStatus::Ok, "{}", last_error());
    assert!(sigma > 0.0 && sigma < 400.0, "{sigma}");
    let bad = DwOperatorParams { tolerance: 0.5, ..params };
    assert_eq!(unsafe { dw_sigma_min(d, g, &bad, &mut sigma) }, DwStatus::InvalidArgument);
    assert!(last_error().contains("tolerance"));
    unsafe {
        dw_damping_free(d);
        dw_grid_free(g);
    }
}

#[test]
fn f_eval_rejects_bad_input() {
    assert_eq!(dw_f_eval(10.0, 0.0, 2.0, 1.0), 1.0);
    assert!(dw_f_eval(-1.0, 0.0, 2.0, 1.0).is_nan());
}

#[test]
fn gcc_verdicts() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dw_damping_constant(1.0, &mut d) }, DwStatus::Ok);
    let mut r = DwGccResult { satisfied: false, max_hit_time: -1.0, witnesses: 9 };
    assert_eq!(unsafe { dw_gcc_certify(d, 2, 64, 64, &mut r) }, DwStatus::Ok, "{}", last_error());
    assert!(r.satisfied && r.witnesses == 0);
    unsafe { dw_damping_free(d) };

    let d = periodic(1.0, 1);
    assert_eq!(unsafe { dw_gcc_certify(d, 2, 64, 64, &mut r) }, DwStatus::Ok);
    assert!(!r.satisfied && r.witnesses > 0);
    unsafe { dw_damping_free(d) };
}

#[test]
fn run_config_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let path = CString::new(configs.join("reduce_check.toml").to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("reduce").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { dw_run_config(path.as_ptr(), out.as_ptr()) }, DwStatus::Ok);
    assert!(dir.path().join("reduce/summary.json").exists());

    let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { dw_run_config(missing.as_ptr(), ptr::null()) }, DwStatus::Config);
    assert_eq!(unsafe { dw_run_config(ptr::null(), ptr::null()) }, DwStatus::NullPointer);
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dampwave.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "dw_last_error",
        "dw_damping_periodic_power",
        "dw_damping_strip",
        "dw_grid_new",
        "dw_sigma_min",
        "dw_f_eval",
        "dw_quasimode_ratio",
        "dw_gcc_certify",
        "dw_run_config",
        "DW_STATUS_UNRESOLVED",
        "typedef struct DwGrid DwGrid",
    ] {
        assert!(text.contains(name), "{name}");
    }
    // Only when a C compiler is around.
    if let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
