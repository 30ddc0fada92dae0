//! C ABI for concept-lens.
//!
//! Every fallible function returns a [`ClStatus`] and writes its result
//! through an out-pointer. Strings handed out by the library must be
//! released with [`cl_string_free`]; handles with their `_free` function.
//! After a failure, [`cl_last_error_message`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use concept_lens::detect::PatternSet;
use concept_lens::evaluate::{evaluate_at, GroundTruth};
use concept_lens::group::{group_objects, GroupingMode};
use concept_lens::model::CodeModel;
use concept_lens::ranking::{build_ranking, profile_objects, write_rank_csv, RankingConfig};
use concept_lens::summarize::{summarize, Format, Level, SummarizeOptions};
use concept_lens::trace::{load_trace, Trace};
use concept_lens::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullArg = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Integrity = 5,
    InvalidArgument = 6,
    EmptyGroundTruth = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClMode {
    Mp = 0,
    MpD = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClLevel {
    Instance = 0,
    Class = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClFormat {
    PlantUml = 0,
    Mermaid = 1,
    Json = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClSummarizeOptions {
    pub mode: ClMode,
    /// Objects ranked strictly above this importance are shown.
    pub threshold: f64,
    pub level: ClLevel,
    pub format: ClFormat,
    pub include_external: bool,
    pub returns: bool,
    pub long_lived: f64,
    pub short_lived: f64,
}

/// A code model with its detected patterns.
pub struct ClModel {
    model: CodeModel,
    patterns: PatternSet,
}

pub struct ClTrace {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ClStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => ClStatus::Io,
            Error::Parse { .. } | Error::UnmatchedExit { .. } => ClStatus::Parse,
            Error::Integrity { .. } | Error::UnknownId { .. } => ClStatus::Integrity,
            Error::EmptyGroundTruth => ClStatus::EmptyGroundTruth,
            Error::InvalidArgument(_) => ClStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ClStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            ClStatus::Internal
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(ClStatus::NullArg, format!("{name} is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(ClStatus::NullArg, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ClStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T, name: &str) -> Result<&'a mut *mut T, Failure> {
    let slot = p
        .as_mut()
        .ok_or_else(|| Failure(ClStatus::NullArg, format!("{name} is null")))?;
    *slot = ptr::null_mut();
    Ok(slot)
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(ClStatus::Internal, "output contains a nul byte".into()))
}

fn mode(m: ClMode) -> GroupingMode {
    match m {
        ClMode::Mp => GroupingMode::Mp,
        ClMode::MpD => GroupingMode::MpD,
    }
}

fn ranking_config(o: &ClSummarizeOptions) -> Result<RankingConfig, Failure> {
    let config = RankingConfig {
        long_lived: o.long_lived,
        short_lived: o.short_lived,
    };
    config.validate()?;
    if !o.threshold.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be finite, got {}", o.threshold)).into());
    }
    Ok(config)
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn cl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cl_summarize_options_default() -> ClSummarizeOptions {
    let ranking = RankingConfig::default();
    ClSummarizeOptions {
        mode: ClMode::MpD,
        threshold: 0.0,
        level: ClLevel::Class,
        format: ClFormat::PlantUml,
        include_external: false,
        returns: false,
        long_lived: ranking.long_lived,
        short_lived: ranking.short_lived,
    }
}

fn model_handle(model: CodeModel) -> *mut ClModel {
    let patterns = PatternSet::detect(&model);
    Box::into_raw(Box::new(ClModel { model, patterns }))
}

/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_model_load(path: *const c_char, out: *mut *mut ClModel) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = concept_lens::model::load_code_model(text(path, "path")?)?;
        *out = model_handle(model);
        Ok(())
    })
}

/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_model_from_json(json: *const c_char, out: *mut *mut ClModel) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = CodeModel::from_json(text(json, "json")?, "<json>")?;
        *out = model_handle(model);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_model_free(model: *mut ClModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_trace_load(path: *const c_char, out: *mut *mut ClTrace) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let trace = load_trace(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(ClTrace { trace }));
        Ok(())
    })
}

/// # Safety
/// `trace_text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_trace_from_text(trace_text: *const c_char, out: *mut *mut ClTrace) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let trace = Trace::from_text(text(trace_text, "trace_text")?)?;
        *out = Box::into_raw(Box::new(ClTrace { trace }));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_trace_free(trace: *mut ClTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of events in the trace; zero for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_trace_event_count(trace: *const ClTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// Detected patterns as JSON.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_detect_patterns_json(model: *const ClModel, out: *mut *mut c_char) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = arg(model, "model")?;
        *out = c_string(m.patterns.to_json(&m.model))?;
        Ok(())
    })
}

/// Object groups as JSON.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_group_json(
    model: *const ClModel,
    trace: *const ClTrace,
    grouping_mode: ClMode,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = arg(model, "model")?;
        let t = &arg(trace, "trace")?.trace;
        let grouping = group_objects(t, &m.model, &m.patterns, mode(grouping_mode));
        *out = c_string(grouping.to_json(t, &m.model, &m.patterns))?;
        Ok(())
    })
}

/// Object profiles as CSV.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_rank_csv(
    trace: *const ClTrace,
    long_lived: f64,
    short_lived: f64,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = &arg(trace, "trace")?.trace;
        let config = RankingConfig {
            long_lived,
            short_lived,
        };
        config.validate()?;
        let mut buf = Vec::new();
        write_rank_csv(&profile_objects(t, &config), &mut buf)?;
        *out = c_string(String::from_utf8(buf).expect("csv is utf-8"))?;
        Ok(())
    })
}

/// Summarized diagram in the requested format. A null `options` means
/// [`cl_summarize_options_default`].
///
/// # Safety
/// Handles must be live, `options` null or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_summarize(
    model: *const ClModel,
    trace: *const ClTrace,
    options: *const ClSummarizeOptions,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = arg(model, "model")?;
        let t = &arg(trace, "trace")?.trace;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cl_summarize_options_default());
        let config = ranking_config(&o)?;
        let grouping = group_objects(t, &m.model, &m.patterns, mode(o.mode));
        let ranking = build_ranking(&profile_objects(t, &config));
        let summary = SummarizeOptions {
            threshold: o.threshold,
            level: match o.level {
                ClLevel::Instance => Level::Instance,
                ClLevel::Class => Level::Class,
            },
            include_external: o.include_external,
            returns: o.returns,
        };
        let diagram = summarize(t, &m.model, &m.patterns, &grouping, &ranking, &summary);
        let format = match o.format {
            ClFormat::PlantUml => Format::PlantUml,
            ClFormat::Mermaid => Format::Mermaid,
            ClFormat::Json => Format::Json,
        };
        *out = c_string(diagram.render(format))?;
        Ok(())
    })
}

/// F-measure report (JSON) of the class-level groups shown at
/// `options.threshold` against a ground truth given as JSON text.
///
/// # Safety
/// Handles must be live, `ground_truth_json` nul-terminated, `options`
/// null or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_evaluate(
    model: *const ClModel,
    trace: *const ClTrace,
    options: *const ClSummarizeOptions,
    ground_truth_json: *const c_char,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = arg(model, "model")?;
        let t = &arg(trace, "trace")?.trace;
        let truth = GroundTruth::from_json(text(ground_truth_json, "ground_truth_json")?, "<ground truth>")?;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cl_summarize_options_default());
        let config = ranking_config(&o)?;
        let grouping = group_objects(t, &m.model, &m.patterns, mode(o.mode));
        let ranking = build_ranking(&profile_objects(t, &config));
        let report = evaluate_at(t, &ranking, &grouping, &truth, o.threshold)?;
        let mut json = serde_json::to_string_pretty(&report).expect("report serialize");
        json.push('\n');
        *out = c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
