use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use curator::dataset::{Dataset, Example, LabelSet};
use curator::{train, FeaturizerSpec, TrainConfig};
use curator_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = curator_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy_model(dir: &Path) -> CString {
    let labels = LabelSet::from_names(&["neg", "pos"]).unwrap();
    let mut ds = Dataset::new(labels.clone());
    for t in ["refund broken", "broken again", "awful refund"] {
        ds.insert(Example::seed(t, "neg")).unwrap();
    }
    for t in ["love excellent", "excellent quality", "love it"] {
        ds.insert(Example::seed(t, "pos")).unwrap();
    }
    let model = train(&labels, &ds, &FeaturizerSpec::hashed(1 << 12), &TrainConfig::default()).unwrap();
    let path = dir.join("model.json");
    model.save(&path).unwrap();
    c(path.to_str().unwrap())
}

#[test]
fn model_round_trip_through_the_c_api() {
    let dir = tempfile::tempdir().unwrap();
    let path = toy_model(dir.path());
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(curator_model_load(path.as_ptr(), &mut model), CuratorStatus::Ok);
        assert!(!model.is_null());

        let mut n = 0usize;
        assert_eq!(curator_model_num_labels(model, &mut n), CuratorStatus::Ok);
        assert_eq!(n, 2);
        let mut label = ptr::null_mut();
        assert_eq!(curator_model_label(model, 1, &mut label), CuratorStatus::Ok);
        assert_eq!(CStr::from_ptr(label).to_str().unwrap(), "pos");
        curator_string_free(label);
        assert_eq!(curator_model_label(model, 2, &mut label), CuratorStatus::InvalidInput);
        assert!(last_error().contains("out of range"));

        let mut idx = usize::MAX;
        let mut probs = [0.0f64; 2];
        let text = c("excellent product");
        assert_eq!(
            curator_model_predict(model, text.as_ptr(), &mut idx, probs.as_mut_ptr(), probs.len()),
            CuratorStatus::Ok
        );
        assert_eq!(idx, 1);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs[1] > probs[0]);
        assert_eq!(
            curator_model_predict(model, text.as_ptr(), &mut idx, probs.as_mut_ptr(), 1),
            CuratorStatus::BufferTooSmall
        );
        assert_eq!(
            curator_model_predict(model, text.as_ptr(), &mut idx, ptr::null_mut(), 0),
            CuratorStatus::Ok
        );

        let data = dir.path().join("test.jsonl");
        std::fs::write(
            &data,
            "{\"text\": \"excellent product\", \"label\": \"pos\"}\n{\"text\": \"broken refund\", \"label\": \"neg\"}\n",
        )
        .unwrap();
        let (mut acc, mut f1) = (0.0, 0.0);
        let data = c(data.to_str().unwrap());
        assert_eq!(curator_model_evaluate(model, data.as_ptr(), &mut acc, &mut f1), CuratorStatus::Ok);
        assert_eq!((acc, f1), (1.0, 1.0));
        let missing = c(dir.path().join("missing.jsonl").to_str().unwrap());
        assert_eq!(curator_model_evaluate(model, missing.as_ptr(), &mut acc, &mut f1), CuratorStatus::Io);

        curator_model_free(model);
        curator_model_free(ptr::null_mut());
    }
}

#[test]
fn null_and_bad_arguments_are_reported() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(curator_model_load(ptr::null(), &mut model), CuratorStatus::NullPointer);
        assert!(last_error().contains("path"));
        let missing = c("/nonexistent/model.json");
        assert_eq!(curator_model_load(missing.as_ptr(), &mut model), CuratorStatus::Io);
        assert!(model.is_null());

        let mut n = 0;
        assert_eq!(curator_model_num_labels(ptr::null(), &mut n), CuratorStatus::NullPointer);

        let bad = [0xffu8, 0xfe, 0];
        let mut out = ptr::null_mut();
        assert_eq!(curator_normalize_text(bad.as_ptr().cast(), &mut out), CuratorStatus::InvalidUtf8);
    }
}

#[test]
fn normalize_and_version() {
    unsafe {
        let mut out = ptr::null_mut();
        let text = c("  Ｈｅｌｌｏ,   WORLD! ");
        assert_eq!(curator_normalize_text(text.as_ptr(), &mut out), CuratorStatus::Ok);
        assert_eq!(CStr::from_ptr(out).to_str().unwrap(), "hello world");
        curator_string_free(out);
        assert_eq!(
            CStr::from_ptr(curator_version()).to_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
    }
}

#[test]
fn run_reports_config_errors_as_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[task]\nlabels = []\n[provider]\n").unwrap();
    let cfg = c(cfg.to_str().unwrap());
    unsafe {
        assert_eq!(curator_run(cfg.as_ptr(), ptr::null(), false, 0), 1);
        assert_eq!(curator_run(ptr::null(), ptr::null(), true, 3), 1);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/curator.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "typedef struct CuratorModel CuratorModel;",
        "CURATOR_STATUS_OK = 0",
        "curator_model_load",
        "curator_model_predict",
        "curator_model_evaluate",
        "curator_model_free",
        "curator_normalize_text",
        "curator_string_free",
        "curator_last_error_message",
        "curator_run",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // compile it as C when a compiler is around
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
