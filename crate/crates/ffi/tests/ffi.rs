use std::ffi::{c_void, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use smc_tune_ffi::*;

fn last_error() -> String {
    let p = smc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn gaussian_run_roundtrip() {
    unsafe {
        let mut target = ptr::null_mut();
        assert_eq!(smc_target_gaussian(3, 1.0, &mut target), SmcStatus::Ok);
        assert_eq!(smc_target_dim(target), 3);
        let x = [1.0, 1.0, 1.0];
        let mut lp = 0.0;
        assert_eq!(smc_target_log_density(target, x.as_ptr(), 3, &mut lp), SmcStatus::Ok);
        assert!((lp + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);

        let mut opts = smc_run_options_default();
        opts.steps = 6;
        opts.particles = 128;
        let mut res = ptr::null_mut();
        assert_eq!(smc_run(target, &opts, &mut res), SmcStatus::Ok);
        assert_eq!(smc_result_steps(res), 6);
        assert!(smc_result_log_z(res).is_finite());
        assert!(smc_result_evaluations(res) > 0);
        let (mut h, mut rho) = (0.0, 0.0);
        assert_eq!(smc_result_step(res, 1, &mut h, &mut rho), SmcStatus::Ok);
        assert!(h > 0.0 && rho.is_nan());
        assert_eq!(smc_result_step(res, 0, &mut h, ptr::null_mut()), SmcStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(smc_result_to_json(res, &mut json), SmcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["steps"].as_array().unwrap().len(), 6);
        smc_string_free(json);

        // identical options reproduce the estimate bit for bit
        let mut again = ptr::null_mut();
        assert_eq!(smc_run(target, &opts, &mut again), SmcStatus::Ok);
        assert_eq!(smc_result_log_z(res).to_bits(), smc_result_log_z(again).to_bits());

        smc_result_free(again);
        smc_result_free(res);
        smc_target_free(target);
    }
}

#[test]
fn klmc_fixed_run_reports_rho() {
    unsafe {
        let mut target = ptr::null_mut();
        assert_eq!(smc_target_logistic_synthetic(40, 3, 1, &mut target), SmcStatus::Ok);
        assert_eq!(smc_target_dim(target), 4);
        let mut opts = smc_run_options_default();
        opts.kernel = SmcKernel::Klmc;
        opts.adaptive = 0;
        opts.steps = 4;
        opts.particles = 64;
        opts.h = 0.05;
        opts.rho = 0.3;
        let mut res = ptr::null_mut();
        assert_eq!(smc_run(target, &opts, &mut res), SmcStatus::Ok);
        let (mut h, mut rho) = (0.0, 0.0);
        assert_eq!(smc_result_step(res, 4, &mut h, &mut rho), SmcStatus::Ok);
        assert_eq!((h, rho), (0.05, 0.3));
        smc_result_free(res);
        smc_target_free(target);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut target = ptr::null_mut();
        assert_eq!(smc_target_gaussian(0, 1.0, &mut target), SmcStatus::InvalidArgument);
        assert!(target.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(smc_target_gaussian(2, 1.0, ptr::null_mut()), SmcStatus::NullPointer);
        assert!(last_error().contains("out"));

        let missing = CString::new("/nonexistent/data.csv").unwrap();
        assert_eq!(smc_target_logistic_csv(missing.as_ptr(), &mut target), SmcStatus::Io);

        assert_eq!(smc_target_gaussian(2, 1.0, &mut target), SmcStatus::Ok);
        assert!(smc_last_error_message().is_null());
        let mut opts = smc_run_options_default();
        opts.kernel = SmcKernel::Mala;
        opts.backward = SmcBackward::Forward;
        let mut res = ptr::null_mut();
        assert_eq!(smc_run(target, &opts, &mut res), SmcStatus::InvalidArgument);
        opts = smc_run_options_default();
        opts.steps = 0;
        assert_eq!(smc_run(target, &opts, &mut res), SmcStatus::InvalidSchedule);
        opts = smc_run_options_default();
        opts.particles = 1;
        assert_eq!(smc_run(target, &opts, &mut res), SmcStatus::InvalidArgument);
        assert!(res.is_null());
        smc_clear_last_error();
        assert!(smc_last_error_message().is_null());
        smc_target_free(target);

        assert!(smc_result_log_z(ptr::null()).is_nan());
        assert_eq!(smc_result_steps(ptr::null()), 0);
        smc_result_free(ptr::null_mut());
        smc_target_free(ptr::null_mut());
        smc_string_free(ptr::null_mut());
    }
}

extern "C" fn shifted_bowl(x: f64, user: *mut c_void) -> f64 {
    let a = unsafe { *(user as *const f64) };
    if x >= 1.0 {
        f64::INFINITY
    } else {
        (x - a) * (x - a)
    }
}

#[test]
fn minimize_through_callback() {
    let mut a = -2.0f64;
    let (mut x, mut evals) = (0.0, 0usize);
    let status = unsafe {
        smc_minimize(
            Some(shifted_bowl),
            &mut a as *mut f64 as *mut c_void,
            5.0,
            0.1,
            2.0,
            1e-4,
            -1.0,
            &mut x,
            &mut evals,
        )
    };
    assert_eq!(status, SmcStatus::Ok);
    assert!((x + 2.0).abs() <= 1e-4, "{x}");
    assert!(evals > 0);

    let status = unsafe { smc_minimize(None, ptr::null_mut(), 0.0, 0.1, 2.0, 1e-4, -1.0, &mut x, ptr::null_mut()) };
    assert_eq!(status, SmcStatus::NullPointer);
    let status = unsafe {
        smc_minimize(Some(shifted_bowl), &mut a as *mut f64 as *mut c_void, 0.0, 0.1, 0.5, 1e-4, -1.0, &mut x, ptr::null_mut())
    };
    assert_eq!(status, SmcStatus::InvalidArgument);
}

#[test]
fn experiment_json_roundtrip() {
    let cfg = CString::new(r#"{"dim": 2, "steps": 4, "particles": 64, "subsample": 16, "replications": 2, "timing": false}"#).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(smc_experiment_run_json(cfg.as_ptr(), &mut out), SmcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(v["summary"]["succeeded"], 2);
        assert_eq!(v["replications"][1]["seed"], 1);
        smc_string_free(out);

        let bad = CString::new(r#"{"dimension": 2}"#).unwrap();
        assert_eq!(smc_experiment_run_json(bad.as_ptr(), &mut out), SmcStatus::InvalidArgument);
        assert!(last_error().contains("dimension"));
        let garbage = CString::new("{").unwrap();
        assert_eq!(smc_experiment_run_json(garbage.as_ptr(), &mut out), SmcStatus::Parse);
    }
}

#[test]
fn header_declares_the_api() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/smc_tune.h")).unwrap();
    for name in [
        "smc_target_gaussian",
        "smc_run",
        "smc_result_free",
        "smc_minimize",
        "smc_last_error_message",
        "SMC_STATUS_OK",
        "typedef struct SmcTarget SmcTarget",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the test binary lives in target/<profile>/deps, next to the freshly
    // built static library
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libsmc_tune_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let tmp = tempdir();
    let exe = tmp.join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("smc-tune-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
