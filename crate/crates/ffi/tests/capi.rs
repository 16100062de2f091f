use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hebbscale_ffi::*;

fn last_error() -> String {
    let p = hs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn census_counts_and_overflow() {
    let (mut a, mut b, mut c) = (0u64, 0u64, 0u64);
    unsafe {
        assert_eq!(hs_census(3, &mut a, &mut b, &mut c), HsStatus::Ok);
        assert_eq!((a, b, c), (6, 8, 12));
        assert!(hs_last_error().is_null());
        assert_eq!(hs_census(40, &mut a, &mut b, &mut c), HsStatus::Ok);
        assert_eq!(b, 1 << 40);
        assert_eq!(c, 3u64.pow(40) - (1 << 40) - 81);
        assert_eq!(hs_census(41, &mut a, &mut b, &mut c), HsStatus::Overflow);
        assert!(last_error().contains("overflow"));
        assert_eq!(hs_census(0, &mut a, &mut b, &mut c), HsStatus::InvalidArgument);
        assert_eq!(hs_census(3, ptr::null_mut(), &mut b, &mut c), HsStatus::NullPointer);
    }
}

#[test]
fn overlap_predictions() {
    let mut p = 0.0;
    let (mut mean, mut std) = (0.0, 0.0);
    unsafe {
        assert_eq!(hs_predicted_max_overlap(1000, 10, &mut p), HsStatus::Ok);
        assert!((p - (2.0 * 10f64.ln()).sqrt() / 1000f64.sqrt()).abs() < 1e-12);
        assert_eq!(hs_measured_max_overlap(1000, 10, 2000, 1, &mut mean, &mut std), HsStatus::Ok);
        assert!(mean > 0.05 && mean < 0.1 && std > 0.0, "{mean} {std}");
        assert_eq!(hs_measured_max_overlap(1000, 10, 0, 1, &mut mean, &mut std), HsStatus::InvalidArgument);
    }
}

#[test]
fn source_lifecycle_and_sampling() {
    let dist = CString::new("laplace").unwrap();
    let mut src: *mut HsSource = ptr::null_mut();
    unsafe {
        assert_eq!(hs_source_new(4, 6, dist.as_ptr(), 9, &mut src), HsStatus::Ok);
        assert_eq!(hs_source_inputs(src), 4);
        let mut a = vec![0.0; 40];
        let mut b = vec![0.0; 40];
        assert_eq!(hs_source_sample(src, 10, 5, a.as_mut_ptr(), 40), HsStatus::Ok);
        assert_eq!(hs_source_sample(src, 10, 5, b.as_mut_ptr(), 40), HsStatus::Ok);
        assert_eq!(a, b);
        assert!(a.iter().any(|&x| x != 0.0));
        assert_eq!(hs_source_sample(src, 11, 5, a.as_mut_ptr(), 40), HsStatus::InvalidArgument);
        assert_eq!(hs_source_sample(src, 10, 5, ptr::null_mut(), 40), HsStatus::NullPointer);
        hs_source_free(src);
        hs_source_free(ptr::null_mut());

        let bad = CString::new("cauchy").unwrap();
        assert_eq!(hs_source_new(4, 4, bad.as_ptr(), 0, &mut src), HsStatus::InvalidArgument);
        assert!(last_error().contains("cauchy"));
        let gauss = CString::new("normal").unwrap();
        assert_eq!(hs_source_new(4, 4, gauss.as_ptr(), 0, &mut src), HsStatus::InvalidArgument);
        assert_eq!(hs_source_new(4, 4, ptr::null(), 0, &mut src), HsStatus::NullPointer);
    }
}

#[test]
fn gradient_statistics_and_time() {
    let dist = CString::new("chi2").unwrap();
    let mut stats: *mut HsGradientStats = ptr::null_mut();
    unsafe {
        assert_eq!(hs_gradstats_new(dist.as_ptr(), 2.0, 0.05, 0.9, 12, 50_000, 3, &mut stats), HsStatus::Ok);
        assert_eq!(hs_gradstats_len(stats), 12);
        let (mut d, mut mu, mut se, mut sigma) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(hs_gradstats_row(stats, 11, &mut d, &mut mu, &mut se, &mut sigma), HsStatus::Ok);
        assert!((d - 0.9).abs() < 1e-12 && mu > 0.0 && sigma > 0.0);
        assert_eq!(hs_gradstats_row(stats, 12, &mut d, &mut mu, &mut se, &mut sigma), HsStatus::InvalidArgument);

        let (mut t10, mut t20) = (0.0, 0.0);
        assert_eq!(hs_predict_time(stats, 10, 0.3, 0.7, &mut t10), HsStatus::Ok);
        assert_eq!(hs_predict_time(stats, 20, 0.3, 0.7, &mut t20), HsStatus::Ok);
        assert!(t10 > 0.0 && (t20 / t10 - 2.0).abs() < 1e-9, "{t10} {t20}");

        let mut eta = 0.0;
        assert_eq!(hs_adaptive_eta(stats, 0.3, 10, &mut eta), HsStatus::Ok);
        assert!(eta > 0.0);
        assert_eq!(hs_adaptive_eta(stats, 1.5, 10, &mut eta), HsStatus::InvalidArgument);
        hs_gradstats_free(stats);
    }
}

#[test]
fn simulate_fixed_and_adaptive() {
    let dist = CString::new("chi2").unwrap();
    let mut src: *mut HsSource = ptr::null_mut();
    let mut stats: *mut HsGradientStats = ptr::null_mut();
    let mut r = HsRunResult::default();
    unsafe {
        assert_eq!(hs_source_new(10, 10, dist.as_ptr(), 0, &mut src), HsStatus::Ok);
        assert_eq!(hs_simulate(src, ptr::null(), 0.01, 0.7, 10_000_000, 4, &mut r), HsStatus::Ok);
        assert!(r.converged && r.final_overlap >= 0.7 && r.crossing == r.steps);

        let mut again = HsRunResult::default();
        assert_eq!(hs_simulate(src, ptr::null(), 0.01, 0.7, 10_000_000, 4, &mut again), HsStatus::Ok);
        assert_eq!(r, again);

        assert_eq!(hs_gradstats_new(dist.as_ptr(), 2.0, 0.01, 0.9, 40, 50_000, 3, &mut stats), HsStatus::Ok);
        assert_eq!(hs_simulate(src, stats, 0.0, 0.7, 10_000_000, 5, &mut r), HsStatus::Ok);
        assert!(r.converged);

        assert_eq!(hs_simulate(src, ptr::null(), 0.0, 0.99, 10, 4, &mut r), HsStatus::NotConverged);
        assert!(!r.converged && r.steps == 10);
        assert!(last_error().contains("10"));

        assert_eq!(hs_simulate(ptr::null(), ptr::null(), 0.01, 0.7, 10, 4, &mut r), HsStatus::NullPointer);
        hs_gradstats_free(stats);
        hs_source_free(src);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>`, found from the directory of the test executable.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "hebbscale.h"

int main(void) {
    uint64_t a, b, c;
    if (hs_census(3, &a, &b, &c) != HS_STATUS_OK) return 1;
    if (a != 6 || b != 8 || c != 12) return 2;
    if (hs_census(41, &a, &b, &c) != HS_STATUS_OVERFLOW || hs_last_error() == NULL) return 3;
    HsSource *src = NULL;
    if (hs_source_new(10, 10, "chi2", 0, &src) != HS_STATUS_OK) return 4;
    HsRunResult r;
    if (hs_simulate(src, NULL, 0.01, 0.7, 10000000, 1, &r) != HS_STATUS_OK || !r.converged) return 5;
    hs_source_free(src);
    printf("%llu\n", (unsigned long long)r.crossing);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let lib = artifact_dir().join("libhebbscale_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let crossing: u64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(crossing > 0);
}
