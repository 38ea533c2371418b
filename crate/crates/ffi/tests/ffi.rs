use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cmp_abc_ffi::*;

fn last_error() -> String {
    let p = cmpabc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cmpabc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn moments_and_errors() {
    let mut out = [0.0; 4];
    let s = [0.0, 0.0, 0.0, 1.0];
    assert_eq!(
        unsafe { cmpabc_moments(s.as_ptr(), 4, out.as_mut_ptr()) },
        CmpAbcStatus::Ok
    );
    assert_eq!(out[0], 0.25);
    assert!((out[3] - 7.0 / 3.0).abs() < 1e-12);

    assert_eq!(
        unsafe { cmpabc_moments(s.as_ptr(), 1, out.as_mut_ptr()) },
        CmpAbcStatus::InvalidArgument
    );
    assert!(last_error().contains("at least 2"));
    assert_eq!(
        unsafe { cmpabc_moments(ptr::null(), 4, out.as_mut_ptr()) },
        CmpAbcStatus::NullPointer
    );
    assert!(last_error().contains("series"));
}

#[test]
fn network_round_trip_through_a_checkpoint() {
    let sizes = [6usize, 4, 2];
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { cmpabc_network_new(sizes.as_ptr(), 3, 7, &mut net) },
        CmpAbcStatus::Ok
    );
    let (mut i, mut l) = (0, 0);
    assert_eq!(unsafe { cmpabc_network_dims(net, &mut i, &mut l) }, CmpAbcStatus::Ok);
    assert_eq!((i, l), (6, 2));

    let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let mut z = [0.0; 2];
    assert_eq!(
        unsafe { cmpabc_network_encode(net, x.as_ptr(), 6, z.as_mut_ptr(), 2) },
        CmpAbcStatus::Ok
    );
    assert!(z.iter().all(|v| *v > 0.0 && *v < 1.0));
    assert_eq!(
        unsafe { cmpabc_network_encode(net, x.as_ptr(), 5, z.as_mut_ptr(), 2) },
        CmpAbcStatus::Numeric
    );

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("n.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cmpabc_network_save(net, path.as_ptr()) }, CmpAbcStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { cmpabc_network_load(path.as_ptr(), &mut back) },
        CmpAbcStatus::Ok
    );
    let mut z2 = [0.0; 2];
    assert_eq!(
        unsafe { cmpabc_network_encode(back, x.as_ptr(), 6, z2.as_mut_ptr(), 2) },
        CmpAbcStatus::Ok
    );
    assert_eq!(z, z2);

    let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { cmpabc_network_load(missing.as_ptr(), &mut none) },
        CmpAbcStatus::Io
    );
    assert!(none.is_null());
    unsafe {
        cmpabc_network_free(net);
        cmpabc_network_free(back);
        cmpabc_network_free(ptr::null_mut());
    }
}

#[test]
fn regression_recovers_a_line() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { cmpabc_regression_fit(x.as_ptr(), 10, 1, y.as_ptr(), 0.0, &mut m) },
        CmpAbcStatus::Ok
    );
    let (mut coef, mut b) = ([0.0], 0.0);
    assert_eq!(
        unsafe { cmpabc_regression_coefficients(m, coef.as_mut_ptr(), 1, &mut b) },
        CmpAbcStatus::Ok
    );
    assert!((coef[0] - 2.0).abs() < 1e-8 && (b - 3.0).abs() < 1e-8);
    let mut pred = [0.0; 2];
    let q = [100.0, -1.0];
    assert_eq!(
        unsafe { cmpabc_regression_predict(m, q.as_ptr(), 2, 1, pred.as_mut_ptr()) },
        CmpAbcStatus::Ok
    );
    assert!((pred[0] - 203.0).abs() < 1e-6 && (pred[1] - 1.0).abs() < 1e-8);
    assert_eq!(
        unsafe { cmpabc_regression_fit(x.as_ptr(), 0, 1, y.as_ptr(), 0.0, &mut m) },
        CmpAbcStatus::InvalidArgument
    );
    unsafe { cmpabc_regression_free(m) };
}

#[test]
fn clusters_find_two_blobs() {
    let z: Vec<f64> = (0..20)
        .flat_map(|i| {
            let c = if i % 2 == 0 { 0.0 } else { 10.0 };
            [c + 0.01 * i as f64, c]
        })
        .collect();
    for kind in [CmpAbcClusterKind::Kmeans, CmpAbcClusterKind::Igmm] {
        let mut m = ptr::null_mut();
        assert_eq!(
            unsafe { cmpabc_clusters_fit(kind, z.as_ptr(), 20, 2, 2, 1, 100, &mut m) },
            CmpAbcStatus::Ok
        );
        let mut k = 0;
        assert_eq!(unsafe { cmpabc_clusters_count(m, &mut k) }, CmpAbcStatus::Ok);
        assert_eq!(k, 2);
        let (mut a, mut b) = (9, 9);
        unsafe {
            cmpabc_clusters_nearest(m, [0.0, 0.0].as_ptr(), 2, &mut a);
            cmpabc_clusters_nearest(m, [10.0, 10.0].as_ptr(), 2, &mut b);
            cmpabc_clusters_free(m);
        }
        assert_ne!(a, b);
    }
}

#[test]
fn run_experiment_rejects_unknown_keys() {
    let cfg = CString::new("seed = 1\nnot.a.key = 2\n").unwrap();
    let out = CString::new("/nonexistent").unwrap();
    assert_eq!(
        unsafe { cmpabc_run_experiment(cfg.as_ptr(), out.as_ptr()) },
        CmpAbcStatus::Config
    );
    assert!(last_error().contains("not.a.key"));
}

fn find_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include "cmp_abc.h"
int main(void) {
    double s[4] = {0, 0, 0, 1}, m[4];
    if (cmpabc_moments(s, 4, m) != CMP_ABC_STATUS_OK) return 1;
    size_t sizes[3] = {4, 3, 2};
    CmpAbcNetwork *net = NULL;
    if (cmpabc_network_new(sizes, 3, 1, &net) != CMP_ABC_STATUS_OK) return 2;
    double x[4] = {0.1, 0.2, 0.3, 0.4}, z[2];
    if (cmpabc_network_encode(net, x, 4, z, 2) != CMP_ABC_STATUS_OK) return 3;
    if (cmpabc_network_encode(net, x, 3, z, 2) == CMP_ABC_STATUS_OK) return 4;
    if (cmpabc_last_error() == NULL) return 5;
    cmpabc_network_free(net);
    printf("%s %.4f\n", cmpabc_version(), m[0]);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let Some(cc) = find_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    // Test binaries live in target/<profile>/deps; the static library one level up.
    let exe = std::env::current_exe().unwrap();
    let lib: PathBuf = exe.parent().unwrap().parent().unwrap().join("libcmp_abc_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        format!("{} 0.2500\n", env!("CARGO_PKG_VERSION"))
    );
}
