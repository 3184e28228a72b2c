use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use geostretch_ffi::*;

fn model(id: &str, params: &[(&str, f64)]) -> *mut GsModel {
    let id = CString::new(id).unwrap();
    let names: Vec<CString> = params.iter().map(|p| CString::new(p.0).unwrap()).collect();
    let name_ptrs: Vec<*const i8> = names.iter().map(|n| n.as_ptr()).collect();
    let values: Vec<f64> = params.iter().map(|p| p.1).collect();
    let mut out = ptr::null_mut();
    let status = unsafe { gs_model_new(id.as_ptr(), name_ptrs.as_ptr(), values.as_ptr(), params.len(), &mut out) };
    assert_eq!(status, GsStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = gs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn metric_is_assembled_row_major() {
    let m = model("linear", &[]);
    assert_eq!(unsafe { gs_model_dim(m) }, 2);
    let x = [1.0, 1.0];
    let mut g = [0.0; 9];
    let mut gi = [0.0; 9];
    let status = unsafe { gs_metric(m, x.as_ptr(), 2, 0.0, g.as_mut_ptr(), gi.as_mut_ptr()) };
    assert_eq!(status, GsStatus::Ok);
    // f(1,1) = (-1, -1)
    let expected = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 3.0];
    assert_eq!(g, expected);
    for i in 0..3 {
        for j in 0..3 {
            let s: f64 = (0..3).map(|k| g[i * 3 + k] * gi[k * 3 + j]).sum();
            assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    unsafe { gs_model_free(m) };
}

#[test]
fn stretching_rates_reproduce_reference_slice() {
    let m = model("davis-skodje", &[("eta", 3.0)]);
    let x = [1.0, 0.5];
    let (mut tan, mut orth) = (0.0, 0.0);
    assert_eq!(unsafe { gs_theta_extrema(m, x.as_ptr(), 2, &mut tan, &mut orth) }, GsStatus::Ok);
    assert!((tan - 0.947610294117647).abs() < 1e-12);
    assert!((orth - 9.33363970588235).abs() < 1e-12);

    // f(1, 0.5) = (-1, -0.25); the planar orthogonal family is spanned by (f2, -f1, 0)
    let v = [-0.25, 1.0, 0.0];
    let mut theta = 0.0;
    assert_eq!(unsafe { gs_geodesic_stretching(m, x.as_ptr(), 2, v.as_ptr(), &mut theta) }, GsStatus::Ok);
    assert!((theta - orth).abs() < 1e-12);
    unsafe { gs_model_free(m) };
}

#[test]
fn psi_and_locate() {
    let m = model("linear", &[]);
    let mut psi = f64::NAN;
    assert_eq!(unsafe { gs_psi(m, [1.0, 0.0].as_ptr(), 2, &mut psi) }, GsStatus::Ok);
    assert!((psi - 21.0).abs() < 1e-9);
    unsafe { gs_model_free(m) };

    let ds = model("davis-skodje", &[]);
    let mut found = GsLocated::default();
    let status = unsafe { gs_locate(ds, [1.0, 0.5].as_ptr(), 2, 1, 0.05, 0.95, GsObjective::TanMin as u32, 0, &mut found) };
    assert_eq!(status, GsStatus::Ok, "{}", last_error());
    assert!((found.coordinate - 0.5).abs() < 6e-3);
    let status = unsafe { gs_locate(ds, [1.0, 0.5].as_ptr(), 2, 1, 0.05, 0.95, 7, 0, &mut found) };
    assert_eq!(status, GsStatus::InvalidArgument);
    assert!(last_error().contains("objective"));
    unsafe { gs_model_free(ds) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = ptr::null_mut();
    let id = CString::new("lorenz").unwrap();
    assert_eq!(unsafe { gs_model_new(id.as_ptr(), ptr::null(), ptr::null(), 0, &mut out) }, GsStatus::UnknownModel);
    assert!(out.is_null());
    assert!(last_error().contains("lorenz"));

    let id = CString::new("davis-skodje").unwrap();
    let name = CString::new("eta").unwrap();
    let names = [name.as_ptr()];
    assert_eq!(unsafe { gs_model_new(id.as_ptr(), names.as_ptr(), [0.5].as_ptr(), 1, &mut out) }, GsStatus::InvalidArgument);
    assert_eq!(unsafe { gs_model_new(ptr::null(), ptr::null(), ptr::null(), 0, &mut out) }, GsStatus::NullPointer);

    let m = model("davis-skodje", &[]);
    let mut g = [0.0; 9];
    assert_eq!(unsafe { gs_metric(m, [-1.0, 0.0].as_ptr(), 2, 0.0, g.as_mut_ptr(), ptr::null_mut()) }, GsStatus::Domain);
    assert_eq!(unsafe { gs_metric(m, [1.0, 0.0, 0.0].as_ptr(), 3, 0.0, g.as_mut_ptr(), ptr::null_mut()) }, GsStatus::InvalidArgument);
    assert_eq!(unsafe { gs_metric(ptr::null(), [1.0, 0.0].as_ptr(), 2, 0.0, g.as_mut_ptr(), ptr::null_mut()) }, GsStatus::NullPointer);
    let mut psi = 0.0;
    assert_eq!(unsafe { gs_psi(m, [1.0, 0.5].as_ptr(), 2, &mut psi) }, GsStatus::Ok);
    assert!(gs_last_error_message().is_null());
    unsafe { gs_model_free(m) };
    unsafe { gs_model_free(ptr::null_mut()) };

    let c = model("constant", &[]);
    let (mut t, mut o) = (0.0, 0.0);
    assert_eq!(unsafe { gs_theta_extrema(c, [0.0, 0.0].as_ptr(), 2, &mut t, &mut o) }, GsStatus::Ok);
    unsafe { gs_model_free(c) };
    let name = unsafe { CStr::from_ptr(gs_status_name(GsStatus::Domain)) };
    assert_eq!(name.to_str().unwrap(), "domain violation");
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/geostretch.h")).unwrap();
    for name in [
        "gs_model_new",
        "gs_model_free",
        "gs_model_dim",
        "gs_metric",
        "gs_geodesic_stretching",
        "gs_theta_extrema",
        "gs_psi",
        "gs_locate",
        "gs_last_error_message",
        "gs_status_name",
        "typedef struct GsModel GsModel",
        "GS_STATUS_NO_EXTREMUM = 8",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the profile directory sits next to target/tmp
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let lib_dir = tmp.parent().unwrap().join(profile);
    assert!(lib_dir.join("libgeostretch_ffi.a").exists(), "static library not found in {}", lib_dir.display());
    let exe = tmp.join("ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-Wall")
        .arg("-Werror")
        .arg("-o")
        .arg(&exe)
        .arg(lib_dir.join("libgeostretch_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("cc available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "tan 0.947610294117647 orth 9.33363970588235 unknown-model 3");
}
