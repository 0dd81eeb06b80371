//! C ABI over `spatial_edr`.
//!
//! Objects are opaque heap handles created by `sedr_*_new` / `sedr_*_fit` /
//! `sedr_*_simulate` and released with the matching `sedr_*_free`. Every
//! fallible call returns a [`SedrStatus`]; on failure the message is kept in
//! thread-local storage and read with [`sedr_last_error_message`].
//!
//! Configuration is passed as the text of a flat `key = value` config file,
//! or NULL for the defaults.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;

use spatial_edr::config::Config;
use spatial_edr::edr::{edr_directions, subspace_distance, CovariancePair, EdrModel};
use spatial_edr::fieldsim::generate_field;
use spatial_edr::lattice::{center_dataset, LatticeRegion, RegressionDataset, ScalarField, Site};
use spatial_edr::predictor::{estimate_neighbor_count, fit, FittedPredictor, NeighborCount};
use spatial_edr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SedrStatus {
    Ok = 0,
    /// Null pointer, bad length or invalid UTF-8.
    InvalidArgument = 1,
    /// Inputs rejected by the library (exit code 2 of the CLI).
    Validation = 2,
    /// Numerical failure (exit code 3 of the CLI).
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

pub struct SedrField {
    inner: ScalarField,
}

pub struct SedrDataset {
    inner: RegressionDataset,
}

pub struct SedrEdrModel {
    inner: EdrModel,
}

pub struct SedrPredictor {
    inner: FittedPredictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

enum Failure {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn arg(msg: &str) -> Failure {
    Failure::Arg(msg.to_string())
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SedrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SedrStatus::Ok
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            SedrStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            match e {
                Error::Io(_) => SedrStatus::Io,
                e if e.is_numerical() => SedrStatus::Numerical,
                _ => SedrStatus::Validation,
            }
        }
        Err(_) => {
            set_error("internal panic");
            SedrStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(arg(&format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| arg(&format!("{what} is NULL")))
}

unsafe fn config(text: *const c_char) -> FfiResult<Config> {
    if text.is_null() {
        return Ok(Config::default());
    }
    let s = CStr::from_ptr(text)
        .to_str()
        .map_err(|_| arg("config text is not UTF-8"))?;
    Ok(Config::parse(s)?)
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(arg("output pointer is NULL"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> FfiResult<()> {
    if len < src.len() {
        return Err(arg(&format!("buffer holds {len} values, {} needed", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(arg("buffer is NULL"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(arg("output pointer is NULL"));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next `sedr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sedr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sedr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulates a field from the `field.*` keys of `config_text`.
#[no_mangle]
pub unsafe extern "C" fn sedr_field_simulate(
    config_text: *const c_char,
    seed: u64,
    out: *mut *mut SedrField,
) -> SedrStatus {
    guard(|| {
        let spec = config(config_text)?.field_spec(None, seed)?;
        emit(out, SedrField { inner: generate_field(&spec)? })
    })
}

/// Field over the box with lower corner `origin` and sides `dims`; `values`
/// holds one value per site in lexicographic order.
#[no_mangle]
pub unsafe extern "C" fn sedr_field_new(
    origin: *const i64,
    dims: *const usize,
    ndim: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut SedrField,
) -> SedrStatus {
    guard(|| {
        let origin = slice(origin, ndim, "origin")?.to_vec();
        let dims = slice(dims, ndim, "dims")?.to_vec();
        let region = LatticeRegion::with_origin(origin, dims)?;
        let values = slice(values, len, "values")?.to_vec();
        emit(out, SedrField { inner: ScalarField::new(region, values)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn sedr_field_ndim(field: *const SedrField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.region().ndim())
}

/// Number of sites.
#[no_mangle]
pub unsafe extern "C" fn sedr_field_len(field: *const SedrField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.values().len())
}

/// Copies the values in lexicographic site order.
#[no_mangle]
pub unsafe extern "C" fn sedr_field_values(field: *const SedrField, buf: *mut f64, len: usize) -> SedrStatus {
    guard(|| copy_out(handle(field, "field")?.inner.values(), buf, len))
}

#[no_mangle]
pub unsafe extern "C" fn sedr_field_free(field: *mut SedrField) {
    free(field)
}

/// `n` samples; `xs` is row-major `n x dim`.
#[no_mangle]
pub unsafe extern "C" fn sedr_dataset_new(
    dim: usize,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut *mut SedrDataset,
) -> SedrStatus {
    guard(|| {
        let total = n.checked_mul(dim).ok_or_else(|| arg("n * dim overflows"))?;
        let xs = slice(xs, total, "xs")?.to_vec();
        let ys = slice(ys, n, "ys")?.to_vec();
        emit(out, SedrDataset { inner: RegressionDataset::new(dim, xs, ys)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn sedr_dataset_free(data: *mut SedrDataset) {
    free(data)
}

/// Centers the covariates and estimates the EDR directions with the
/// `kernel.*`, `schedule.*`, `floor.*` and `dimension.*` keys.
#[no_mangle]
pub unsafe extern "C" fn sedr_edr_fit(
    data: *const SedrDataset,
    config_text: *const c_char,
    out: *mut *mut SedrEdrModel,
) -> SedrStatus {
    guard(|| {
        let data = &handle(data, "dataset")?.inner;
        let cfg = config(config_text)?;
        let (centered, _) = center_dataset(data)?;
        let pair = CovariancePair::estimate(&centered, &cfg.estimator()?)?;
        let model = edr_directions(&pair, cfg.dimension_rule()?)?;
        if model.dimension() == 0 {
            return Err(Error::NoSignal.into());
        }
        emit(out, SedrEdrModel { inner: model })
    })
}

/// Selected number of directions `D`.
#[no_mangle]
pub unsafe extern "C" fn sedr_edr_dimension(model: *const SedrEdrModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dimension())
}

/// Covariate dimension `d`.
#[no_mangle]
pub unsafe extern "C" fn sedr_edr_dim(model: *const SedrEdrModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Copies all `d` eigenvalues in decreasing order.
#[no_mangle]
pub unsafe extern "C" fn sedr_edr_eigenvalues(model: *const SedrEdrModel, buf: *mut f64, len: usize) -> SedrStatus {
    guard(|| copy_out(handle(model, "model")?.inner.eigenvalues(), buf, len))
}

/// Copies the `D x d` directions, row-major.
#[no_mangle]
pub unsafe extern "C" fn sedr_edr_directions(model: *const SedrEdrModel, buf: *mut f64, len: usize) -> SedrStatus {
    guard(|| {
        let dirs = handle(model, "model")?.inner.directions();
        copy_out(dirs.transpose().as_slice(), buf, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn sedr_edr_free(model: *mut SedrEdrModel) {
    free(model)
}

/// Distance between the row spans of two row-major matrices with `cols`
/// columns.
#[no_mangle]
pub unsafe extern "C" fn sedr_subspace_distance(
    a: *const f64,
    rows_a: usize,
    b: *const f64,
    rows_b: usize,
    cols: usize,
    out: *mut f64,
) -> SedrStatus {
    guard(|| {
        let len_a = rows_a.checked_mul(cols).ok_or_else(|| arg("rows_a * cols overflows"))?;
        let len_b = rows_b.checked_mul(cols).ok_or_else(|| arg("rows_b * cols overflows"))?;
        let ma = DMatrix::from_row_slice(rows_a, cols, slice(a, len_a, "a")?);
        let mb = DMatrix::from_row_slice(rows_b, cols, slice(b, len_b, "b")?);
        write(out, subspace_distance(&ma, &mb)?)
    })
}

/// Runs the neighbor-count scan with the `scan.*` keys over the whole field.
#[no_mangle]
pub unsafe extern "C" fn sedr_neighbor_scan(
    field: *const SedrField,
    config_text: *const c_char,
    out_d: *mut usize,
    out_cap_reached: *mut bool,
) -> SedrStatus {
    guard(|| {
        let field = &handle(field, "field")?.inner;
        let res = estimate_neighbor_count(field, field.region(), &config(config_text)?.scan()?)?;
        write(out_d, res.d)?;
        if !out_cap_reached.is_null() {
            *out_cap_reached = res.cap_reached;
        }
        Ok(())
    })
}

/// Fits the dimension-reduction predictor on the whole field. `d = 0` runs
/// the neighbor scan first.
#[no_mangle]
pub unsafe extern "C" fn sedr_predictor_fit(
    field: *const SedrField,
    d: usize,
    config_text: *const c_char,
    out: *mut *mut SedrPredictor,
) -> SedrStatus {
    guard(|| {
        let field = &handle(field, "field")?.inner;
        let count = if d == 0 { NeighborCount::Auto } else { NeighborCount::Fixed(d) };
        let model = fit(field, field.region(), count, &config(config_text)?.predictor()?)?;
        emit(out, SedrPredictor { inner: model })
    })
}

/// Number of neighbors the predictor uses.
#[no_mangle]
pub unsafe extern "C" fn sedr_predictor_neighbors(pred: *const SedrPredictor) -> usize {
    pred.as_ref().map_or(0, |p| p.inner.d())
}

/// Number of EDR directions the predictor uses.
#[no_mangle]
pub unsafe extern "C" fn sedr_predictor_dimension(pred: *const SedrPredictor) -> usize {
    pred.as_ref().map_or(0, |p| p.inner.edr().dimension())
}

/// Predicts at `site` (length `ndim`) from the values of `field`, whose
/// region is taken as the observed region.
#[no_mangle]
pub unsafe extern "C" fn sedr_predictor_predict(
    pred: *const SedrPredictor,
    field: *const SedrField,
    site: *const i64,
    ndim: usize,
    out: *mut f64,
) -> SedrStatus {
    guard(|| {
        let pred = &handle(pred, "predictor")?.inner;
        let field = &handle(field, "field")?.inner;
        if ndim != field.region().ndim() {
            return Err(arg("site dimension does not match the field"));
        }
        let site = Site::new(slice(site, ndim, "site")?.to_vec())?;
        write(out, pred.predict_site(field, field.region(), &site)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn sedr_predictor_free(pred: *mut SedrPredictor) {
    free(pred)
}
