//! C ABI for `calboot`.
//!
//! Objects cross the boundary as opaque handles created by `cb_*_new` style
//! functions and released by the matching `cb_*_free`. Fallible calls return
//! a [`CbStatus`]; the message of the most recent failure on the calling
//! thread is available from [`cb_last_error_message`]. Panics are caught and
//! reported as [`CbStatus::Panic`].
//!
//! # Safety
//!
//! Every pointer argument must be null or valid for the length given next to
//! it, and handles must come from this library and not be used after their
//! `free` call. Strings are NUL-terminated UTF-8.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use calboot::calibrate::{ra_run, RaConfig};
use calboot::contour::{Association, Observed};
use calboot::harness::{run_scenario, ScenarioConfig};
use calboot::mathkit::linalg::DesignMatrix;
use calboot::mathkit::rng::RngStream;
use calboot::mathkit::special;
use calboot::models::{Dataset, GaussianMean, Lasso, LinReg, Model, VonMises};
use calboot::refine::{ra_dr_pipeline, PipelineOutcome, TieBreak};
use calboot::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    RankDeficient = 4,
    NonConvergence = 5,
    Degenerate = 6,
    UnsupportedProfile = 7,
    EmptySample = 8,
    Config = 9,
    Parse = 10,
    Io = 11,
    Serialize = 12,
    Panic = 13,
}

impl From<&Error> for CbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => CbStatus::Domain,
            Error::RankDeficient { .. } => CbStatus::RankDeficient,
            Error::NonConvergence { .. } => CbStatus::NonConvergence,
            Error::Degenerate(_) => CbStatus::Degenerate,
            Error::UnsupportedProfile(_) => CbStatus::UnsupportedProfile,
            Error::EmptySample(_) => CbStatus::EmptySample,
            Error::Config(_) => CbStatus::Config,
            Error::Parse { .. } | Error::MissingValue { .. } => CbStatus::Parse,
            Error::Io(_) => CbStatus::Io,
            Error::Serialize(_) => CbStatus::Serialize,
        }
    }
}

/// Opaque dataset handle.
pub struct CbDataset {
    inner: Dataset,
}

/// Opaque model handle.
pub struct CbModel {
    inner: Box<dyn Model>,
}

/// Opaque result of an RA-DR pipeline.
pub struct CbRefined {
    inner: PipelineOutcome,
}

/// RA tuning. Zero in any field selects the library default for the data.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CbRaParams {
    /// Inner replicates `B` per iteration.
    pub inner_reps: usize,
    /// Step constant as a multiple of `n` (`c = d·n`).
    pub step_multiplier: f64,
    /// Iteration budget `T`.
    pub max_iter: usize,
    pub m_lower: usize,
    pub m_upper: usize,
    pub m_init: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), CbStatus>>(f: F) -> CbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            CbStatus::Panic
        }
    }
}

fn lib(e: Error) -> CbStatus {
    set_last_error(e.to_string());
    CbStatus::from(&e)
}

fn invalid(msg: &str) -> CbStatus {
    set_last_error(msg.to_string());
    CbStatus::InvalidArgument
}

fn null(name: &str) -> CbStatus {
    set_last_error(format!("`{name}` is null"));
    CbStatus::NullPointer
}

unsafe fn nonnull<'a, T>(p: *const T, name: &str) -> Result<&'a T, CbStatus> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], CbStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), CbStatus> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn association(index: i64) -> Association {
    if index < 0 {
        Association::Joint
    } else {
        Association::Profile { index: index as usize }
    }
}

fn ra_config(params: &CbRaParams, n: usize, p: usize, alpha: f64) -> Result<RaConfig, CbStatus> {
    let mut c = RaConfig::for_data(n, p, alpha);
    if params.inner_reps > 0 {
        c.inner_reps = params.inner_reps;
    }
    if params.step_multiplier > 0.0 {
        c.step_constant = params.step_multiplier * n as f64;
    }
    if params.max_iter > 0 {
        c.max_iter = params.max_iter;
    }
    if params.m_lower > 0 {
        c.m_lower = params.m_lower;
    }
    if params.m_upper > 0 {
        c.m_upper = params.m_upper;
    }
    c.m_init = if params.m_init > 0.0 { params.m_init } else { c.m_init.clamp(c.m_lower as f64, c.m_upper.max(c.m_lower) as f64) };
    c.validate().map_err(lib)?;
    Ok(c)
}

// ------------------------------------------------------------------- errors

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn cb_status_name(status: CbStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CbStatus::Ok => c"ok",
        CbStatus::NullPointer => c"null_pointer",
        CbStatus::InvalidArgument => c"invalid_argument",
        CbStatus::Domain => c"domain",
        CbStatus::RankDeficient => c"rank_deficient",
        CbStatus::NonConvergence => c"non_convergence",
        CbStatus::Degenerate => c"degenerate",
        CbStatus::UnsupportedProfile => c"unsupported_profile",
        CbStatus::EmptySample => c"empty_sample",
        CbStatus::Config => c"config",
        CbStatus::Parse => c"parse",
        CbStatus::Io => c"io",
        CbStatus::Serialize => c"serialize",
        CbStatus::Panic => c"panic",
    };
    s.as_ptr()
}

// --------------------------------------------------------- special functions

#[no_mangle]
pub extern "C" fn cb_norm_cdf(x: f64) -> f64 {
    special::norm_cdf(x)
}

#[no_mangle]
pub unsafe extern "C" fn cb_norm_quantile(p: f64, out: *mut f64) -> CbStatus {
    guard(|| write_out(out, special::norm_quantile(p).map_err(lib)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn cb_chisq_cdf(x: f64, df: f64, out: *mut f64) -> CbStatus {
    guard(|| write_out(out, special::chisq_cdf(x, df).map_err(lib)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn cb_chisq_quantile(p: f64, df: f64, out: *mut f64) -> CbStatus {
    guard(|| write_out(out, special::chisq_quantile(p, df).map_err(lib)?, "out"))
}

// ------------------------------------------------------------------ datasets

/// Scalar sample of `n` observations.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_new_scalar(y: *const f64, n: usize, out: *mut *mut CbDataset) -> CbStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        let y = slice_in(y, n, "y")?.to_vec();
        let h = Box::new(CbDataset { inner: Dataset::scalar(y, "ffi") });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// Regression data: `x` is `n × p` in column-major order, `y` has length `n`.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_new_regression(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    out: *mut *mut CbDataset,
) -> CbStatus {
    guard(|| {
        if n == 0 || p == 0 {
            return Err(invalid("n and p must be >= 1"));
        }
        let x = DesignMatrix::from_col_major(n, p, slice_in(x, n * p, "x")?.to_vec()).map_err(lib)?;
        let y = slice_in(y, n, "y")?.to_vec();
        let data = Dataset::regression(x, y, "ffi").map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CbDataset { inner: data })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cb_dataset_n(data: *const CbDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.n())
}

#[no_mangle]
pub unsafe extern "C" fn cb_dataset_free(data: *mut CbDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

// -------------------------------------------------------------------- models

unsafe fn new_model<M: Model + 'static>(m: Result<M, Error>, out: *mut *mut CbModel) -> CbStatus {
    guard(|| {
        let m = m.map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CbModel { inner: Box::new(m) })), "out")
    })
}

/// Gaussian mean with known variance.
#[no_mangle]
pub unsafe extern "C" fn cb_model_gaussian_mean(variance: f64, out: *mut *mut CbModel) -> CbStatus {
    new_model(GaussianMean::new(variance), out)
}

/// Linear regression with known noise standard deviation.
#[no_mangle]
pub unsafe extern "C" fn cb_model_linreg_known(sigma: f64, out: *mut *mut CbModel) -> CbStatus {
    new_model(LinReg::known(sigma), out)
}

/// Linear regression with unknown noise level.
#[no_mangle]
pub unsafe extern "C" fn cb_model_linreg_unknown(out: *mut *mut CbModel) -> CbStatus {
    new_model(Ok(LinReg::unknown()), out)
}

/// Lasso with penalty `lambda` and plug-in noise variance `sigma2`.
#[no_mangle]
pub unsafe extern "C" fn cb_model_lasso(lambda: f64, sigma2: f64, out: *mut *mut CbModel) -> CbStatus {
    new_model(Lasso::new(lambda, sigma2), out)
}

/// Von Mises location with known concentration.
#[no_mangle]
pub unsafe extern "C" fn cb_model_von_mises(kappa: f64, out: *mut *mut CbModel) -> CbStatus {
    new_model(VonMises::new(kappa), out)
}

#[no_mangle]
pub unsafe extern "C" fn cb_model_free(model: *mut CbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Minimizer of the model loss; `out` must hold the parameter dimension
/// (1 for scalar models, `p` for regression).
#[no_mangle]
pub unsafe extern "C" fn cb_model_fit(
    model: *const CbModel,
    data: *const CbDataset,
    out: *mut f64,
    out_len: usize,
) -> CbStatus {
    guard(|| {
        let model = nonnull(model, "model")?;
        let data = nonnull(data, "data")?;
        let hat = model.inner.fit(&data.inner).map_err(lib)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < hat.len() {
            return Err(invalid(&format!("out needs {} slots, got {out_len}", hat.len())));
        }
        slice::from_raw_parts_mut(out, hat.len()).copy_from_slice(&hat);
        Ok(())
    })
}

/// Default RA parameters (all zero: data-dependent library defaults).
#[no_mangle]
pub extern "C" fn cb_ra_params_default() -> CbRaParams {
    CbRaParams::default()
}

// ------------------------------------------------------------------- RA / DR

/// One RA run at level `alpha`; writes the calibrated resample size.
/// `assoc_index < 0` selects the joint association, otherwise the profile
/// association of that coordinate.
#[no_mangle]
pub unsafe extern "C" fn cb_ra_run(
    model: *const CbModel,
    data: *const CbDataset,
    assoc_index: i64,
    alpha: f64,
    params: CbRaParams,
    seed: u64,
    out_m_alpha: *mut usize,
) -> CbStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        let data = &nonnull(data, "data")?.inner;
        let obs = Observed::fit(model.as_ref(), data.clone()).map_err(lib)?;
        let config = ra_config(&params, data.n(), model.param_dim(data), alpha)?;
        let out = ra_run(model.as_ref(), &obs, association(assoc_index), &config, &RngStream::new(seed)).map_err(lib)?;
        write_out(out_m_alpha, out.m_alpha, "out_m_alpha")
    })
}

/// RA at each of `n_alphas` levels, pooled and refined by DR with `b_out`
/// selections (0 = pool size).
#[no_mangle]
pub unsafe extern "C" fn cb_ra_dr_pipeline(
    model: *const CbModel,
    data: *const CbDataset,
    assoc_index: i64,
    alphas: *const f64,
    n_alphas: usize,
    params: CbRaParams,
    b_out: usize,
    seed: u64,
    out: *mut *mut CbRefined,
) -> CbStatus {
    guard(|| {
        let model = &nonnull(model, "model")?.inner;
        let data = &nonnull(data, "data")?.inner;
        if n_alphas == 0 {
            return Err(invalid("need at least one alpha"));
        }
        let alphas = slice_in(alphas, n_alphas, "alphas")?;
        let obs = Observed::fit(model.as_ref(), data.clone()).map_err(lib)?;
        let base = ra_config(&params, data.n(), model.param_dim(data), alphas[0])?;
        let b_out = (b_out > 0).then_some(b_out);
        let outcome = ra_dr_pipeline(
            model.as_ref(),
            &obs,
            association(assoc_index),
            alphas,
            &base,
            b_out,
            TieBreak::Random,
            &RngStream::new(seed),
        )
        .map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CbRefined { inner: outcome })), "out")
    })
}

/// Number of refined draws.
#[no_mangle]
pub unsafe extern "C" fn cb_refined_len(r: *const CbRefined) -> usize {
    r.as_ref().map_or(0, |r| r.inner.refined.draws.len())
}

/// Parameter dimension of each draw.
#[no_mangle]
pub unsafe extern "C" fn cb_refined_dim(r: *const CbRefined) -> usize {
    r.as_ref().and_then(|r| r.inner.refined.draws.first()).map_or(0, |d| d.theta_star.len())
}

/// KS distance of the refined contour values from uniform.
#[no_mangle]
pub unsafe extern "C" fn cb_refined_ks(r: *const CbRefined) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.refined.ks_statistic)
}

/// Calibrated `m` of the `k`-th RA run (in the order the levels were given).
#[no_mangle]
pub unsafe extern "C" fn cb_refined_m_alpha(r: *const CbRefined, k: usize, out: *mut usize) -> CbStatus {
    guard(|| {
        let r = nonnull(r, "refined")?;
        let run = r.inner.runs.get(k).ok_or_else(|| invalid(&format!("run index {k} out of range")))?;
        write_out(out, run.m_alpha, "out")
    })
}

/// Copy the draws into `out` (row-major, `len × dim` values).
#[no_mangle]
pub unsafe extern "C" fn cb_refined_thetas(r: *const CbRefined, out: *mut f64, out_len: usize) -> CbStatus {
    guard(|| {
        let r = nonnull(r, "refined")?;
        let flat: Vec<f64> = r.inner.refined.draws.iter().flat_map(|d| d.theta_star.iter().copied()).collect();
        copy_out(&flat, out, out_len)
    })
}

/// Copy the contour values of the draws into `out` (`len` values).
#[no_mangle]
pub unsafe extern "C" fn cb_refined_u_values(r: *const CbRefined, out: *mut f64, out_len: usize) -> CbStatus {
    guard(|| {
        let r = nonnull(r, "refined")?;
        copy_out(&r.inner.refined.u_values(), out, out_len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, out_len: usize) -> Result<(), CbStatus> {
    if out_len < values.len() {
        return Err(invalid(&format!("out needs {} slots, got {out_len}", values.len())));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

#[no_mangle]
pub unsafe extern "C" fn cb_refined_free(r: *mut CbRefined) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

// ----------------------------------------------------------------- scenarios

/// Run a scenario from key/value config text (same format as `cb run
/// --config`). Files are written to the config's output directory when
/// `write_files` is nonzero. `out_report` receives the report JSON, to be
/// released with [`cb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cb_run_scenario(config: *const c_char, write_files: i32, out_report: *mut *mut c_char) -> CbStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config).to_str().map_err(|_| invalid("config is not UTF-8"))?;
        let cfg = ScenarioConfig::from_kv_str(text).map_err(lib)?;
        let out = run_scenario(&cfg).map_err(lib)?;
        if write_files != 0 {
            out.write(&cfg.output_dir).map_err(lib)?;
        }
        let json = CString::new(out.report.to_json().map_err(lib)?).map_err(|_| invalid("report has a NUL byte"))?;
        write_out(out_report, json.into_raw(), "out_report")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
