use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use finpot_ffi::*;

const TOL: f64 = 1e-10;

fn example() -> *mut FinpotOperator {
    let mut op = ptr::null_mut();
    assert_eq!(
        unsafe { finpot_operator_worked_example(&mut op) },
        FinpotStatus::Ok
    );
    assert!(!op.is_null());
    op
}

fn last_error() -> String {
    let p = finpot_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn worked_example_values() {
    let op = example();
    let mut tr = FinpotComplex { re: 0.0, im: 0.0 };
    let mut det = tr;
    let mut index = 0usize;
    unsafe {
        assert_eq!(finpot_trace(op, TOL, &mut tr), FinpotStatus::Ok);
        assert_eq!(finpot_det_id_plus(op, TOL, &mut det), FinpotStatus::Ok);
        assert_eq!(finpot_index(op, TOL, &mut index), FinpotStatus::Ok);
    }
    assert!((tr.re - 4.0).abs() < 1e-10 && (tr.im - 1.0).abs() < 1e-10);
    assert!((det.re - 31.0).abs() < 1e-9 && (det.im + 1.0).abs() < 1e-9);
    assert_eq!(index, 2);
    assert!(finpot_last_error().is_null());

    let mut star = ptr::null_mut();
    let mut tr_star = tr;
    unsafe {
        assert_eq!(finpot_operator_adjoint(op, &mut star), FinpotStatus::Ok);
        assert_eq!(finpot_trace(star, TOL, &mut tr_star), FinpotStatus::Ok);
        finpot_operator_free(star);
        finpot_operator_free(op);
    }
    assert!((tr_star.re - 4.0).abs() < 1e-10 && (tr_star.im + 1.0).abs() < 1e-10);
}

#[test]
fn json_round_trip_and_reports() {
    let op = example();
    let mut text = ptr::null_mut();
    unsafe {
        assert_eq!(finpot_operator_to_json(op, &mut text), FinpotStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(
            finpot_operator_from_json(text, &mut again),
            FinpotStatus::Ok
        );
        let mut text2 = ptr::null_mut();
        assert_eq!(finpot_operator_to_json(again, &mut text2), FinpotStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        finpot_string_free(text);
        finpot_string_free(text2);
        finpot_operator_free(again);

        let mut report = ptr::null_mut();
        assert_eq!(finpot_analyze_json(op, TOL, &mut report), FinpotStatus::Ok);
        let v: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        assert_eq!(v["index"], 2);
        assert_eq!(v["dim_w"], 3);
        finpot_string_free(report);

        let mut passed = false;
        let mut verify = ptr::null_mut();
        assert_eq!(
            finpot_verify(op, TOL, 1e-7, &mut passed, &mut verify),
            FinpotStatus::Ok
        );
        assert!(passed);
        let v: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(verify).to_str().unwrap()).unwrap();
        assert_eq!(v["checks"].as_array().unwrap().len(), 8);
        finpot_string_free(verify);
        assert_eq!(
            finpot_verify(op, TOL, 1e-7, &mut passed, ptr::null_mut()),
            FinpotStatus::Ok
        );
        finpot_operator_free(op);
    }
}

#[test]
fn error_codes() {
    let mut op = ptr::null_mut();
    let unbounded = CString::new(
        r#"{"schema_version": "1", "operator": {"ambient": "infinite", "cutoff": 1, "block": [[[0, 0]]],
            "rank_one": [{"left": {"finite": {"1": [1, 0]}},
                          "right": {"tails": [{"kind": "power", "coeff": [1, 0], "exponent": -1, "start": 2}]}}]}}"#,
    )
    .unwrap();
    unsafe {
        assert_eq!(
            finpot_operator_from_json(unbounded.as_ptr(), &mut op),
            FinpotStatus::Validation
        );
        assert!(op.is_null());
        assert!(last_error().starts_with("UnboundedTail"));

        let broken = CString::new("{\"schema_version\": ").unwrap();
        assert_eq!(
            finpot_operator_from_json(broken.as_ptr(), &mut op),
            FinpotStatus::MalformedFile
        );
        assert!(last_error().contains("line"));

        assert_eq!(
            finpot_operator_from_json(ptr::null(), &mut op),
            FinpotStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/operator.json").unwrap();
        assert_eq!(
            finpot_operator_from_file(missing.as_ptr(), &mut op),
            FinpotStatus::Io
        );

        let ex = example();
        let mut tr = FinpotComplex { re: 0.0, im: 0.0 };
        assert_eq!(
            finpot_trace(ex, 0.0, &mut tr),
            FinpotStatus::InvalidArgument
        );
        assert_eq!(
            finpot_trace(ex, TOL, ptr::null_mut()),
            FinpotStatus::NullPointer
        );
        assert_eq!(
            finpot_trace(ptr::null(), TOL, &mut tr),
            FinpotStatus::NullPointer
        );
        finpot_operator_free(ex);
        finpot_operator_free(ptr::null_mut());
        finpot_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(finpot_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header().join("finpot.h")).unwrap();
    for name in [
        "finpot_last_error",
        "finpot_version",
        "finpot_operator_from_json",
        "finpot_operator_from_file",
        "finpot_operator_worked_example",
        "finpot_operator_free",
        "finpot_operator_adjoint",
        "finpot_operator_to_json",
        "finpot_index",
        "finpot_trace",
        "finpot_det_id_plus",
        "finpot_analyze_json",
        "finpot_verify",
        "finpot_string_free",
        "typedef struct FinpotOperator FinpotOperator",
        "FINPOT_STATUS_VALIDATION = 4",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the static library, when a C
/// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libfinpot_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} missing", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header())
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("trace 4.000000000000 1.000000000000"),
        "{text}"
    );
    assert!(
        text.contains("det 31.000000000000 -1.000000000000"),
        "{text}"
    );
    assert!(text.contains("index 2"), "{text}");
    assert!(text.contains("unbounded 4 UnboundedTail"), "{text}");
}
