use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use aegcn::data::write_homo;
use aegcn::synthetic::{planted_homo, Planted};
use aegcn_ffi::*;

fn dataset() -> (tempfile::TempDir, CString) {
    let dir = tempfile::tempdir().unwrap();
    write_homo(dir.path(), &planted_homo(&Planted::default(), 2)).unwrap();
    let c = CString::new(dir.path().to_str().unwrap()).unwrap();
    (dir, c)
}

fn last_error() -> String {
    let p = aegcn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    aegcn_string_free(p);
    s
}

#[test]
fn train_score_and_predict_through_the_c_interface() {
    let (_dir, path) = dataset();
    unsafe {
        let mut ds = ptr::null_mut();
        let st = aegcn_dataset_load(path.as_ptr(), AegcnModelKind::Homogeneous, &mut ds);
        assert_eq!(st, AegcnStatus::Ok);
        let (mut n, mut f) = (0, 0);
        assert_eq!(aegcn_dataset_shape(ds, &mut n, &mut f), AegcnStatus::Ok);
        assert_eq!((n, f), (180, 3));

        let overrides = CString::new(r#"{"epochs": 20, "d1": 8}"#).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(
            aegcn_config_new(ds, overrides.as_ptr(), &mut cfg),
            AegcnStatus::Ok
        );
        assert_eq!(aegcn_config_set_seed(cfg, 9), AegcnStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(aegcn_config_to_json(cfg, &mut json), AegcnStatus::Ok);
        let config: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(config["epochs"], 20);
        assert_eq!(config["seed"], 9);
        assert_eq!(config["gamma"], 10.0);

        let mut run = ptr::null_mut();
        assert_eq!(aegcn_train(ds, cfg, &mut run), AegcnStatus::Ok);
        let (mut acc, mut f1) = (0.0, 0.0);
        assert_eq!(
            aegcn_run_test_scores(run, &mut acc, &mut f1),
            AegcnStatus::Ok
        );
        assert!((0.0..=1.0).contains(&acc) && (0.0..=1.0).contains(&f1));

        let mut log = ptr::null_mut();
        assert_eq!(aegcn_run_log_json(run, &mut log), AegcnStatus::Ok);
        let log: serde_json::Value = serde_json::from_str(&take_string(log)).unwrap();
        assert_eq!(log["epochs"].as_array().unwrap().len(), 20);
        assert_eq!(log["final"]["test"]["accuracy"], acc);

        let mut probs = vec![0.0; n * f];
        let st = aegcn_run_predict(run, ds, probs.as_mut_ptr(), probs.len());
        assert_eq!(st, AegcnStatus::Ok);
        for row in probs.chunks(f) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let st = aegcn_run_predict(run, ds, probs.as_mut_ptr(), probs.len() - 1);
        assert_eq!(st, AegcnStatus::InvalidArgument);

        aegcn_run_free(run);
        aegcn_config_free(cfg);
        aegcn_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut ds = ptr::null_mut();
        let st = aegcn_dataset_load(ptr::null(), AegcnModelKind::Homogeneous, &mut ds);
        assert_eq!(st, AegcnStatus::InvalidArgument);
        assert!(ds.is_null());

        let empty = tempfile::tempdir().unwrap();
        let p = CString::new(empty.path().to_str().unwrap()).unwrap();
        let st = aegcn_dataset_load(p.as_ptr(), AegcnModelKind::Homogeneous, &mut ds);
        assert_eq!(st, AegcnStatus::Data);
        assert!(last_error().contains("meta.json"), "{}", last_error());

        let (_dir, path) = dataset();
        assert_eq!(
            aegcn_dataset_load(path.as_ptr(), AegcnModelKind::Homogeneous, &mut ds),
            AegcnStatus::Ok
        );
        let mut cfg = ptr::null_mut();
        for bad in [
            r#"{"dropout": 2.0}"#,
            r#"{"gama": 1}"#,
            r#"{"model": "hetero"}"#,
            "{",
        ] {
            let o = CString::new(bad).unwrap();
            assert_eq!(
                aegcn_config_new(ds, o.as_ptr(), &mut cfg),
                AegcnStatus::Config,
                "{bad}"
            );
        }
        assert!(cfg.is_null());
        assert_eq!(
            aegcn_train(ds, ptr::null(), &mut ptr::null_mut()),
            AegcnStatus::InvalidArgument
        );
        aegcn_dataset_free(ds);
        aegcn_dataset_free(ptr::null_mut());
        aegcn_string_free(ptr::null_mut());
    }
}

#[test]
fn gradcheck_and_version() {
    let mut passed = false;
    assert_eq!(unsafe { aegcn_gradcheck(0, &mut passed) }, AegcnStatus::Ok);
    assert!(passed);
    let v = unsafe { CStr::from_ptr(aegcn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/aegcn.h"))
            .unwrap();
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(Path::parent)
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let lib = target_dir().join("libaegcn_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let work = tempfile::tempdir().unwrap();
    let exe = work.path().join("demo");
    let status = Command::new(&cc)
        .arg(crate_dir.join("examples/demo.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());

    let (_dir, path) = dataset();
    let out = Command::new(&exe)
        .arg(path.to_str().unwrap())
        .arg("homo")
        .arg(r#"{"epochs": 10}"#)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{stdout} {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("180 nodes, 3 classes"), "{stdout}");
    assert!(stdout.contains("row0 1.000000"), "{stdout}");

    let bad = Command::new(&exe)
        .arg("/nonexistent")
        .arg("homo")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}
