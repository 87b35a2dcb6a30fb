use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use skewlab_ffi::*;

const ROBIN: &str = r#"
[grid]
n_cells = 16

[bc]
kind = "robin"
alpha = 1.0

[g]
r0 = 1.0
k = 100.0

[problem]
gamma = 2.0
dt = 1e-3

[cocycle]
dt = 1e-2
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(skewlab_last_error()) }.to_string_lossy().into_owned()
}

fn model(src: &str) -> *mut SkewlabModel {
    let text = CString::new(src).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { skewlab_model_from_toml(text.as_ptr(), &mut m) };
    assert_eq!(st, SkewlabStatus::Ok, "{}", last_error());
    assert!(!m.is_null());
    m
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(skewlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bad_config_reports_message() {
    let text = CString::new("[grid]\nn_cells = 16\n").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { skewlab_model_from_toml(text.as_ptr(), &mut m) };
    assert_eq!(st, SkewlabStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("bc.kind required"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { skewlab_model_from_toml(ptr::null(), &mut m) }, SkewlabStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { skewlab_model_node_count(ptr::null(), &mut n) }, SkewlabStatus::NullPointer);
    assert!(unsafe { skewlab_model_config_hash(ptr::null()) }.is_null());
    assert_eq!(unsafe { skewlab_trace_len(ptr::null()) }, 0);
    unsafe {
        skewlab_model_free(ptr::null_mut());
        skewlab_trace_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let text = CString::new(vec![b'a', 0xff, b'b']).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { skewlab_model_from_toml(text.as_ptr(), &mut m) }, SkewlabStatus::InvalidUtf8);
}

#[test]
fn eigenpair_and_buffer_sizes() {
    let m = model(ROBIN);
    unsafe {
        let mut n = 0usize;
        assert_eq!(skewlab_model_node_count(m, &mut n), SkewlabStatus::Ok);
        assert_eq!(n, 17);
        let mut g0 = 0.0;
        let mut small = vec![0.0; n - 1];
        assert_eq!(skewlab_first_eigenpair(m, &mut g0, small.as_mut_ptr(), small.len()), SkewlabStatus::BufferTooSmall);
        let mut e0 = vec![0.0; n];
        assert_eq!(skewlab_first_eigenpair(m, &mut g0, e0.as_mut_ptr(), e0.len()), SkewlabStatus::Ok);
        assert!(g0 > 1.70 && g0 < 1.72, "{g0}");
        let sup = e0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((sup - 1.0).abs() < 1e-12);
        assert!(e0.iter().all(|v| *v > 0.0));
        let hash = CStr::from_ptr(skewlab_model_config_hash(m)).to_str().unwrap();
        assert_eq!(hash.len(), 16);
        skewlab_model_free(m);
    }
}

#[test]
fn lyapunov_of_constant_shift() {
    let m = model(ROBIN);
    unsafe {
        let mut g0 = 0.0;
        skewlab_first_eigenpair(m, &mut g0, ptr::null_mut(), 0);
        let mut e = SkewlabExponent::default();
        assert_eq!(skewlab_lyapunov(m, 0.1, 0.2, 200.0, &mut e), SkewlabStatus::Ok, "{}", last_error());
        assert!((e.value - (2.0 - g0)).abs() < 1e-6, "{e:?}");
        assert_eq!(skewlab_lyapunov(m, 0.1, 0.2, -1.0, &mut e), SkewlabStatus::Config);
        skewlab_model_free(m);
    }
}

#[test]
fn trace_records_and_bounds() {
    let m = model(ROBIN);
    unsafe {
        let mut tr = ptr::null_mut();
        assert_eq!(skewlab_trace_new(m, 0.0, 0.0, 10.0, &mut tr), SkewlabStatus::Ok, "{}", last_error());
        let len = skewlab_trace_len(tr);
        assert!(len > 1);
        let (mut t, mut lc) = (0.0, 0.0);
        assert_eq!(skewlab_trace_get(tr, len - 1, &mut t, &mut lc), SkewlabStatus::Ok);
        assert!((t - 10.0).abs() < 1e-9, "{t}");
        assert!(lc > 0.0);
        assert_eq!(skewlab_trace_get(tr, len, &mut t, &mut lc), SkewlabStatus::OutOfRange);
        skewlab_trace_free(tr);
        skewlab_model_free(m);
    }
}

#[test]
fn pullback_matches_oracle_for_zero_h() {
    let m = model(ROBIN.replace("kind = \"robin\"\nalpha = 1.0", "kind = \"neumann\"").as_str());
    unsafe {
        let mut b = vec![0.0; 17];
        let mut out = SkewlabPullback::default();
        assert_eq!(skewlab_pullback(m, 0.3, 0.4, b.as_mut_ptr(), b.len(), &mut out), SkewlabStatus::Ok, "{}", last_error());
        assert!(out.converged);
        let mut y = 0.0;
        assert_eq!(skewlab_homogeneous_oracle(2.0, 100.0, 1.0, &mut y), SkewlabStatus::Ok);
        assert!((out.b_norm - y).abs() < 1e-4, "{} vs {y}", out.b_norm);
        assert!(b.iter().all(|v| (v - y).abs() < 1e-4));
        skewlab_model_free(m);
    }
}

#[test]
fn oracle_rejects_nonpositive() {
    let mut y = 0.0;
    assert_eq!(unsafe { skewlab_homogeneous_oracle(-1.0, 1.0, 1.0, &mut y) }, SkewlabStatus::Config);
    assert!(!last_error().is_empty());
}

#[test]
fn advance_wraps() {
    let th = [0.9, 0.5];
    let om = [1.0, std::f64::consts::SQRT_2];
    let mut out = [0.0; 2];
    assert_eq!(unsafe { skewlab_advance(th.as_ptr(), om.as_ptr(), 0.25, out.as_mut_ptr()) }, SkewlabStatus::Ok);
    assert!((out[0] - 0.15).abs() < 1e-12, "{out:?}");
    assert!((0.0..1.0).contains(&out[1]));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/skewlab.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "skewlab_version",
        "skewlab_last_error",
        "skewlab_model_from_toml",
        "skewlab_model_free",
        "skewlab_model_config_hash",
        "skewlab_model_node_count",
        "skewlab_first_eigenpair",
        "skewlab_lyapunov",
        "skewlab_trace_new",
        "skewlab_trace_len",
        "skewlab_trace_get",
        "skewlab_trace_free",
        "skewlab_pullback",
        "skewlab_homogeneous_oracle",
        "skewlab_advance",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(header()).output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
