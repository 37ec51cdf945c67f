//! C ABI for `sepselect`.
//!
//! Datasets and selection traces are opaque heap handles owned by the caller
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`SepselectStatus`]; on failure a message is available from
//! [`sepselect_last_error`] on the same thread until the next failing call.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sepselect::{
    evaluation, minmax_normalize, partition_by_class, selector, separability, stats, stratified_folds,
    ClassPartition, Dataset, Error, FeatureSubset, LabelColumn, SelectionTrace, SeparabilityParams,
    SeparabilityScore, Variant,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepselectStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Degenerate = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepselectVariant {
    Full = 0,
    NoDirWithin = 1,
    NoDirBetween = 2,
    DistanceOnly = 3,
}

impl From<SepselectVariant> for Variant {
    fn from(v: SepselectVariant) -> Self {
        match v {
            SepselectVariant::Full => Variant::Full,
            SepselectVariant::NoDirWithin => Variant::NoDirWithin,
            SepselectVariant::NoDirBetween => Variant::NoDirBetween,
            SepselectVariant::DistanceOnly => Variant::DistanceOnly,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepselectParams {
    pub alpha: f64,
    pub beta: f64,
    pub variant: SepselectVariant,
    pub eps_norm: f64,
    pub eps_div: f64,
}

impl From<&SepselectParams> for SeparabilityParams {
    fn from(p: &SepselectParams) -> Self {
        SeparabilityParams {
            alpha: p.alpha,
            beta: p.beta,
            variant: p.variant.into(),
            eps_norm: p.eps_norm,
            eps_div: p.eps_div,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SepselectScore {
    pub theta_dis: f64,
    pub theta_dir: f64,
    pub lambda_dis: f64,
    pub lambda_dir: f64,
    pub sep: f64,
}

impl From<SeparabilityScore> for SepselectScore {
    fn from(s: SeparabilityScore) -> Self {
        SepselectScore {
            theta_dis: s.theta_dis,
            theta_dir: s.theta_dir,
            lambda_dis: s.lambda_dis,
            lambda_dir: s.lambda_dir,
            sep: s.sep,
        }
    }
}

/// Opaque dataset handle with its class partition.
pub struct SepselectDataset {
    dataset: Dataset,
    partition: ClassPartition,
}

/// Opaque selection trace handle.
pub struct SepselectTrace {
    trace: SelectionTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SepselectStatus {
    match err {
        e if e.is_io() => SepselectStatus::Io,
        Error::Parse { .. } | Error::Csv { .. } | Error::Json(_) => SepselectStatus::Parse,
        Error::DegenerateFriedman(_) => SepselectStatus::Degenerate,
        _ => SepselectStatus::InvalidArgument,
    }
}

type FfiResult = Result<(), (SepselectStatus, String)>;

fn fail(status: SepselectStatus, msg: impl Into<String>) -> FfiResult {
    Err((status, msg.into()))
}

fn lift(err: Error) -> (SepselectStatus, String) {
    (status_of(&err), err.to_string())
}

fn guard(f: impl FnOnce() -> FfiResult) -> SepselectStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SepselectStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SepselectStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SepselectStatus, String)> {
    if p.is_null() {
        return Err((SepselectStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SepselectStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (SepselectStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((SepselectStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SepselectStatus, String)> {
    p.as_ref()
        .ok_or_else(|| (SepselectStatus::NullPointer, format!("{what} is null")))
}

fn store<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return fail(SepselectStatus::NullPointer, "output handle pointer is null");
    }
    // SAFETY: checked non-null; caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write<T>(out: *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return fail(SepselectStatus::NullPointer, "output pointer is null");
    }
    // SAFETY: checked non-null; caller provides a writable slot.
    unsafe { *out = value };
    Ok(())
}

fn wrap_dataset(dataset: Dataset, normalize: bool) -> SepselectDataset {
    let dataset = if normalize { minmax_normalize(&dataset) } else { dataset };
    let partition = partition_by_class(&dataset);
    SepselectDataset { dataset, partition }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sepselect_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default parameters: alpha = beta = 1, full criterion, 1e-12 guards.
#[no_mangle]
pub extern "C" fn sepselect_params_default() -> SepselectParams {
    let d = SeparabilityParams::default();
    SepselectParams {
        alpha: d.alpha,
        beta: d.beta,
        variant: SepselectVariant::Full,
        eps_norm: d.eps_norm,
        eps_div: d.eps_div,
    }
}

/// Loads a CSV file. `label` is a header name or `#index`.
///
/// # Safety
/// `path` and `label` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_dataset_load_csv(
    path: *const c_char,
    label: *const c_char,
    has_header: bool,
    normalize: bool,
    out: *mut *mut SepselectDataset,
) -> SepselectStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let label: LabelColumn = c_str(label, "label")?.parse().map_err(lift)?;
        let d = sepselect::load_csv(path, &label, has_header).map_err(lift)?;
        store(out, wrap_dataset(d, normalize))
    })
}

/// Builds a dataset from a row-major `n x m` matrix and integer class labels.
///
/// # Safety
/// `features` must point to `n * m` doubles and `labels` to `n` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_dataset_from_matrix(
    features: *const f64,
    n: usize,
    m: usize,
    labels: *const u32,
    normalize: bool,
    out: *mut *mut SepselectDataset,
) -> SepselectStatus {
    guard(|| {
        let len = n
            .checked_mul(m)
            .ok_or((SepselectStatus::InvalidArgument, "n * m overflows".to_string()))?;
        let x = slice(features, len, "features")?;
        let y = slice(labels, n, "labels")?;
        // zero-padded so that text order equals numeric order
        let names: Vec<String> = y.iter().map(|l| format!("{l:010}")).collect();
        let feature_names = (0..m).map(|j| format!("f{j}")).collect();
        let d = Dataset::new(x.to_vec(), n, m, &names, feature_names).map_err(lift)?;
        store(out, wrap_dataset(d, normalize))
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepselect_dataset_free(ds: *mut SepselectDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live dataset handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_dataset_shape(
    ds: *const SepselectDataset,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> SepselectStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        write(n, ds.dataset.n())?;
        write(m, ds.dataset.m())?;
        write(p, ds.dataset.p())
    })
}

unsafe fn subset_arg(
    ds: &SepselectDataset,
    indices: *const usize,
    len: usize,
) -> Result<FeatureSubset, (SepselectStatus, String)> {
    let idx = slice(indices, len, "indices")?;
    FeatureSubset::new(idx.to_vec(), ds.dataset.m()).map_err(lift)
}

unsafe fn params_arg(params: *const SepselectParams) -> Result<SeparabilityParams, (SepselectStatus, String)> {
    let p: SeparabilityParams = handle(params, "params")?.into();
    p.validate().map_err(lift)?;
    Ok(p)
}

/// Criterion on the given feature subset (an empty subset scores zero).
///
/// # Safety
/// `ds` must be a live handle, `indices` must point to `len` values, `params`
/// must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_separability(
    ds: *const SepselectDataset,
    indices: *const usize,
    len: usize,
    params: *const SepselectParams,
    out: *mut SepselectScore,
) -> SepselectStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let subset = subset_arg(ds, indices, len)?;
        let params = params_arg(params)?;
        let score = separability::separability(&ds.dataset, &ds.partition, &subset, &params);
        write(out, score.into())
    })
}

/// Greedy selection of `k` features. `workers = 0` uses all cores.
///
/// # Safety
/// `ds` must be a live handle, `params` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_select(
    ds: *const SepselectDataset,
    k: usize,
    params: *const SepselectParams,
    workers: usize,
    out: *mut *mut SepselectTrace,
) -> SepselectStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let params = params_arg(params)?;
        let trace = if workers == 0 {
            selector::select(&ds.dataset, &ds.partition, k, &params)
        } else {
            selector::select_with_workers(&ds.dataset, &ds.partition, k, &params, workers)
        }
        .map_err(lift)?;
        store(out, SepselectTrace { trace })
    })
}

/// Number of steps in a trace; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn sepselect_trace_len(trace: *const SepselectTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// Step `step` (0-based) of a trace. Any output pointer may be NULL.
///
/// # Safety
/// `trace` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_trace_step(
    trace: *const SepselectTrace,
    step: usize,
    feature: *mut usize,
    gain: *mut f64,
    score: *mut SepselectScore,
) -> SepselectStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        let s = t.trace.steps.get(step).ok_or_else(|| {
            (
                SepselectStatus::InvalidArgument,
                format!("step {step} out of range (len {})", t.trace.len()),
            )
        })?;
        if !feature.is_null() {
            *feature = s.feature;
        }
        if !gain.is_null() {
            *gain = s.gain;
        }
        if !score.is_null() {
            *score = s.score_after.into();
        }
        Ok(())
    })
}

/// Copies up to `cap` selected feature indices into `out`, in selection order.
///
/// # Safety
/// `trace` must be a live handle and `out` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sepselect_trace_features(
    trace: *const SepselectTrace,
    out: *mut usize,
    cap: usize,
) -> SepselectStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        let features = t.trace.features();
        let count = features.len().min(cap);
        if count > 0 {
            if out.is_null() {
                return fail(SepselectStatus::NullPointer, "out is null");
            }
            ptr::copy_nonoverlapping(features.as_ptr(), out, count);
        }
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepselect_trace_free(trace: *mut SepselectTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Pooled kNN accuracy with stratified folds.
///
/// # Safety
/// `ds` must be a live handle, `indices` must point to `len` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_knn_accuracy(
    ds: *const SepselectDataset,
    indices: *const usize,
    len: usize,
    knn_k: usize,
    folds: usize,
    seed: u64,
    out: *mut f64,
) -> SepselectStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let subset = subset_arg(ds, indices, len)?;
        let fa = stratified_folds(&ds.dataset, folds, seed).map_err(lift)?;
        let acc = evaluation::knn_accuracy(&ds.dataset, &subset, &fa, knn_k).map_err(lift)?;
        write(out, acc)
    })
}

/// Normalized mutual information of two labelings of equal length.
///
/// # Safety
/// `labels` and `clusters` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_nmi(
    labels: *const usize,
    clusters: *const usize,
    len: usize,
    out: *mut f64,
) -> SepselectStatus {
    guard(|| {
        let a = slice(labels, len, "labels")?;
        let b = slice(clusters, len, "clusters")?;
        write(out, evaluation::nmi(a, b).map_err(lift)?)
    })
}

/// Nemenyi critical difference for `s` algorithms over `n` datasets.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepselect_nemenyi_cd(s: usize, n: usize, q_alpha: f64, out: *mut f64) -> SepselectStatus {
    guard(|| write(out, stats::nemenyi_cd(s, n, q_alpha).map_err(lift)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_pointers_are_reported() {
        let status = unsafe { sepselect_dataset_shape(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
        assert_eq!(status, SepselectStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(sepselect_last_error()) };
        assert!(msg.to_str().unwrap().contains("dataset"));
        assert_eq!(unsafe { sepselect_trace_len(ptr::null()) }, 0);
        unsafe {
            sepselect_dataset_free(ptr::null_mut());
            sepselect_trace_free(ptr::null_mut());
        }
    }

    #[test]
    fn label_padding_keeps_numeric_order() {
        let x = [0.0, 1.0, 2.0];
        let y = [10u32, 2, 2];
        let mut ds = ptr::null_mut();
        let st = unsafe { sepselect_dataset_from_matrix(x.as_ptr(), 3, 1, y.as_ptr(), false, &mut ds) };
        assert_eq!(st, SepselectStatus::Ok);
        let d = unsafe { &*ds };
        assert_eq!(d.dataset.labels(), &[1, 0, 0]);
        unsafe { sepselect_dataset_free(ds) };
    }
}
