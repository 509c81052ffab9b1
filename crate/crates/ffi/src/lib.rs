//! C ABI over the curator core.
//!
//! Every entry point returns a [`CuratorStatus`]. On failure the message is
//! available from [`curator_last_error_message`] on the same thread. Strings
//! handed out by this library must be released with [`curator_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use curator::classifier::{evaluate_with, ClassifierError, Featurizer};
use curator::cli::{cmd_run, RunOverrides};
use curator::dataset::{read_records, LabelSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuratorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidInput = 4,
    BufferTooSmall = 5,
    Provider = 6,
    Panic = 7,
}

/// Opaque classifier handle.
pub struct CuratorModel {
    model: curator::Model,
    featurizer: Box<dyn Featurizer>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(CuratorStatus, String);

impl From<ClassifierError> for Failure {
    fn from(e: ClassifierError) -> Self {
        let status = match e {
            ClassifierError::Io(_) => CuratorStatus::Io,
            ClassifierError::Provider(_) => CuratorStatus::Provider,
            _ => CuratorStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CuratorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CuratorStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside curator");
            CuratorStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CuratorStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CuratorStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(CuratorStatus::NullPointer, format!("{what} is null")))
}

unsafe fn model_arg<'a>(p: *const CuratorModel) -> Result<&'a CuratorModel, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CuratorStatus::NullPointer, "model is null".into()))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(CuratorStatus::InvalidInput, "string contains NUL".into()))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn curator_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn curator_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn curator_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the normalized form of `text` to `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn curator_normalize_text(text: *const c_char, out: *mut *mut c_char) -> CuratorStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(curator::normalize_text(text))?;
        Ok(())
    })
}

/// Loads a model file written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn curator_model_load(path: *const c_char, out: *mut *mut CuratorModel) -> CuratorStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = curator::Model::load(path)?;
        let featurizer = model.featurizer()?;
        *out = Box::into_raw(Box::new(CuratorModel { model, featurizer }));
        Ok(())
    })
}

/// Frees a model handle. NULL is ignored.
///
/// # Safety
/// `model` must come from `curator_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn curator_model_free(model: *mut CuratorModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn curator_model_num_labels(model: *const CuratorModel, out: *mut usize) -> CuratorStatus {
    guard(|| {
        let m = model_arg(model)?;
        *out_arg(out, "out")? = m.model.num_classes();
        Ok(())
    })
}

/// Writes a copy of label `index` to `*out`; free it with `curator_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn curator_model_label(
    model: *const CuratorModel,
    index: usize,
    out: *mut *mut c_char,
) -> CuratorStatus {
    guard(|| {
        let m = model_arg(model)?;
        let out = out_arg(out, "out")?;
        let label = m.model.labels().get(index).ok_or_else(|| {
            Failure(
                CuratorStatus::InvalidInput,
                format!("label index {index} out of range for {} labels", m.model.num_classes()),
            )
        })?;
        *out = into_c_string(label.clone())?;
        Ok(())
    })
}

/// Predicts the class of `text`. When `probabilities` is non-NULL it must
/// hold at least `capacity` doubles and receives one probability per label.
///
/// # Safety
/// `model` must be a live handle, `text` NUL-terminated, `class_index`
/// writable and `probabilities` valid for `capacity` writes when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn curator_model_predict(
    model: *const CuratorModel,
    text: *const c_char,
    class_index: *mut usize,
    probabilities: *mut f64,
    capacity: usize,
) -> CuratorStatus {
    guard(|| {
        let m = model_arg(model)?;
        let text = str_arg(text, "text")?;
        let class_index = out_arg(class_index, "class_index")?;
        let p = m.model.predict_with(m.featurizer.as_ref(), text)?;
        if !probabilities.is_null() {
            if capacity < p.probabilities.len() {
                return Err(Failure(
                    CuratorStatus::BufferTooSmall,
                    format!("need {} slots, got {capacity}", p.probabilities.len()),
                ));
            }
            ptr::copy_nonoverlapping(p.probabilities.as_ptr(), probabilities, p.probabilities.len());
        }
        *class_index = p.class_index;
        Ok(())
    })
}

/// Scores the model on a JSONL record file.
///
/// # Safety
/// `model` must be a live handle, `data_path` NUL-terminated, and the
/// output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn curator_model_evaluate(
    model: *const CuratorModel,
    data_path: *const c_char,
    accuracy: *mut f64,
    macro_f1: *mut f64,
) -> CuratorStatus {
    guard(|| {
        let m = model_arg(model)?;
        let path = str_arg(data_path, "data_path")?;
        let accuracy = out_arg(accuracy, "accuracy")?;
        let macro_f1 = out_arg(macro_f1, "macro_f1")?;
        let labels = LabelSet::from_names(m.model.labels()).map_err(|e| Failure(CuratorStatus::InvalidInput, e.to_string()))?;
        let data = read_records(path, Some(&labels)).map_err(|e| {
            let status = match e {
                curator::dataset::DatasetError::Io(_) => CuratorStatus::Io,
                _ => CuratorStatus::InvalidInput,
            };
            Failure(status, e.to_string())
        })?;
        let report = evaluate_with(&m.model, m.featurizer.as_ref(), &data.dataset)?;
        *accuracy = report.accuracy;
        *macro_f1 = report.macro_f1;
        Ok(())
    })
}

/// Runs a curation job from a TOML config, as `curator run` does, and
/// returns its exit code (0 ok, 1 config, 2 provider, 3 initialization).
/// `out_dir` may be NULL; the seed is used only when `has_seed` is true.
///
/// # Safety
/// `config_path` and a non-NULL `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn curator_run(
    config_path: *const c_char,
    out_dir: *const c_char,
    has_seed: bool,
    seed: u64,
) -> i32 {
    let mut code = curator::cli::EXIT_CONFIG;
    let status = guard(|| {
        let config = str_arg(config_path, "config_path")?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(out_dir, "out_dir")?))
        };
        let overrides = RunOverrides {
            seed: has_seed.then_some(seed),
            out,
            max_iterations: None,
        };
        code = cmd_run(config.as_ref(), &overrides);
        Ok(())
    });
    if status != CuratorStatus::Ok {
        return curator::cli::EXIT_CONFIG;
    }
    code
}
