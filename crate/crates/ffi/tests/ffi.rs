use std::ffi::{CStr, CString};
use std::ptr;

use fjs_ffi::*;

fn last_error() -> String {
    let p = fjs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn datasets_round_trip_through_handles() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(fjs_dataset_sample_target(50, 3, &mut ds), FjsStatus::Ok);
        assert!(fjs_last_error().is_null());
        let mut n = 0;
        assert_eq!(fjs_dataset_len(ds, &mut n), FjsStatus::Ok);
        assert_eq!(n, 50);
        let (mut x, mut y) = (f64::NAN, f64::NAN);
        assert_eq!(fjs_dataset_get(ds, 49, &mut x, &mut y), FjsStatus::Ok);
        assert!(x.is_finite() && y.is_finite());
        assert_eq!(fjs_dataset_get(ds, 50, &mut x, &mut y), FjsStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        fjs_dataset_free(ds);
        fjs_dataset_free(ptr::null_mut());
    }
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(fjs_dataset_len(ptr::null(), ptr::null_mut()), FjsStatus::NullPointer);
        assert!(last_error().contains("dataset"));
        assert_eq!(fjs_analytic_target_nll(ptr::null_mut()), FjsStatus::NullPointer);
    }
}

#[test]
fn models_train_predict_and_evaluate() {
    unsafe {
        let (mut src, mut tgt) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(fjs_dataset_sample_source(0, &mut src), FjsStatus::Ok);
        assert_eq!(fjs_dataset_sample_target(400, 0, &mut tgt), FjsStatus::Ok);
        let method = CString::new("source_only").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(fjs_model_train(method.as_ptr(), src, tgt, 3, 0, &mut model), FjsStatus::Ok);
        let (mut mu, mut sigma) = (0.0, 0.0);
        assert_eq!(fjs_model_predict(model, 0.5, &mut mu, &mut sigma), FjsStatus::Ok);
        assert!(mu.is_finite() && sigma > 0.0);
        assert_eq!(fjs_model_predict(model, f64::NAN, &mut mu, &mut sigma), FjsStatus::InvalidArgument);
        let mut nll = 0.0;
        assert_eq!(fjs_model_nll(model, tgt, &mut nll), FjsStatus::Ok);
        assert!(nll.is_finite());

        let unknown = CString::new("cida").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(fjs_model_train(unknown.as_ptr(), src, tgt, 3, 0, &mut other), FjsStatus::Config);
        assert!(other.is_null());
        assert_eq!(fjs_model_train(method.as_ptr(), src, tgt, 0, 0, &mut other), FjsStatus::Config);

        fjs_model_free(model);
        fjs_dataset_free(src);
        fjs_dataset_free(tgt);
    }
}

#[test]
fn optimal_importance_is_the_density_ratio() {
    let (p, q) = ([0.2, 0.3, 0.5], [0.5, 0.25, 0.25]);
    let mut w = [0.0; 3];
    let mut value = 0.0;
    let status = unsafe { fjs_optimal_importance(p.as_ptr(), q.as_ptr(), 3, w.as_mut_ptr(), &mut value) };
    assert_eq!(status, FjsStatus::Ok);
    for i in 0..3 {
        assert!((w[i] - q[i] / p[i]).abs() < 1e-12);
    }
    let bad = [0.5, 0.6, 0.1];
    let status = unsafe { fjs_optimal_importance(bad.as_ptr(), q.as_ptr(), 3, ptr::null_mut(), &mut value) };
    assert_eq!(status, FjsStatus::InvalidArgument);
}

#[test]
fn theorem_suites_and_analytic_value() {
    let mut checked = 0;
    assert_eq!(unsafe { fjs_verify_theorem(1, 20, 0, &mut checked) }, FjsStatus::Ok);
    assert_eq!(checked, 20);
    assert_eq!(unsafe { fjs_verify_theorem(3, 20, 0, &mut checked) }, FjsStatus::InvalidArgument);
    let mut nll = 0.0;
    assert_eq!(unsafe { fjs_analytic_target_nll(&mut nll) }, FjsStatus::Ok);
    assert!((nll - 0.6007).abs() < 5e-4);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fjs.h")).unwrap();
    for name in ["FjsStatus", "FJS_STATUS_PANIC", "typedef struct FjsModel FjsModel", "fjs_model_train", "fjs_last_error"] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/fjs.h");
    let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() else {
        eprintln!("no C compiler available; skipped");
        return;
    };
    assert!(status.success());
}
