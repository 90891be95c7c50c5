//! C ABI over `nclangevin`.
//!
//! Conventions:
//! * every fallible function returns an [`NclStatus`]; on failure
//!   [`ncl_last_error`] describes the problem;
//! * models are opaque [`NclGmm`] handles released with [`ncl_gmm_free`];
//! * vectors are `double` arrays with an explicit length, matrices are
//!   row-major `dim * dim` arrays;
//! * results are written to caller-owned buffers, whose capacity is checked.
//!
//! No function unwinds across the boundary: panics become
//! [`NclStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use nclangevin::models::{read_model_file, tweedie_denoise, Component, GmmModel, ScoreField};
use nclangevin::rng::Stream;
use nclangevin::samplers::{run_chain, SamplerConfig, Variant};
use nclangevin::theory::{contraction_check, stationary_covariance};
use nclangevin::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Noise-corrected step size below `sigma2 / 2`.
    StepSizeCondition = 3,
    DimensionMismatch = 4,
    Singular = 5,
    Divergence = 6,
    Io = 7,
    Parse = 8,
    /// An output buffer is too small.
    BufferTooSmall = 9,
    Panic = 10,
}

/// Sampler variants accepted by [`ncl_run_chain`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NclVariant {
    Basic = 0,
    NoiseCorrected = 1,
    HalfDenoise = 2,
}

/// Opaque Gaussian mixture handle.
pub struct NclGmm {
    model: GmmModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> NclStatus {
    match e {
        Error::DimensionMismatch { .. } => NclStatus::DimensionMismatch,
        Error::StepSizeCondition { .. } => NclStatus::StepSizeCondition,
        Error::Singular(_) => NclStatus::Singular,
        Error::Divergence { .. } => NclStatus::Divergence,
        Error::Io { .. } => NclStatus::Io,
        Error::Parse { .. } | Error::Config { .. } | Error::Json(_) | Error::Csv(_) => NclStatus::Parse,
        Error::InvalidParameter { .. } | Error::Degenerate(_) => NclStatus::InvalidArgument,
    }
}

struct Fail(NclStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NclStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NclStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(NclStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a>(ptr: *const NclGmm) -> Result<&'a GmmModel, Fail> {
    ptr.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

fn check_capacity(needed: usize, have: usize) -> Result<(), Fail> {
    if have < needed {
        return Err(Fail(
            NclStatus::BufferTooSmall,
            format!("output buffer holds {have} values, {needed} needed"),
        ));
    }
    Ok(())
}

unsafe fn emit(model: GmmModel, out: *mut *mut NclGmm) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(NclGmm { model }));
    Ok(())
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ncl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ncl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a mixture of `k` isotropic kernels in `dim` dimensions.
/// `means` holds `k * dim` values, kernel by kernel.
///
/// # Safety
/// `weights` and `variances` must point to `k` doubles, `means` to
/// `k * dim` doubles and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_create(
    dim: usize,
    k: usize,
    weights: *const f64,
    means: *const f64,
    variances: *const f64,
    out: *mut *mut NclGmm,
) -> NclStatus {
    guard(|| {
        let w = slice(weights, k, "weights")?;
        let m = slice(means, k.saturating_mul(dim), "means")?;
        let v = slice(variances, k, "variances")?;
        let components = (0..k)
            .map(|i| Component {
                weight: w[i],
                mean: m[i * dim..(i + 1) * dim].to_vec(),
                variance: v[i],
            })
            .collect();
        emit(GmmModel::new(dim, components)?, out)
    })
}

/// The 2D benchmark mixture with `kernels` kernels.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_canonical(kernels: usize, out: *mut *mut NclGmm) -> NclStatus {
    guard(|| emit(GmmModel::canonical(kernels)?, out))
}

/// Reads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable storage for one
/// handle.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_load(path: *const c_char, out: *mut *mut NclGmm) -> NclStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(NclStatus::InvalidArgument, "path is not UTF-8".into()))?;
        emit(read_model_file(Path::new(path))?, out)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_free(model: *mut NclGmm) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_dim(model: *const NclGmm) -> usize {
    model.as_ref().map_or(0, |h| h.model.dim())
}

/// The model convolved with `N(0, sigma2 I)`, as a new handle.
///
/// # Safety
/// `model` must be a live handle and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_noisy(model: *const NclGmm, sigma2: f64, out: *mut *mut NclGmm) -> NclStatus {
    guard(|| emit(handle(model)?.noisy_model(sigma2)?, out))
}

/// Log density at `x`.
///
/// # Safety
/// `x` must point to `dim` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_log_pdf(model: *const NclGmm, x: *const f64, dim: usize, out: *mut f64) -> NclStatus {
    guard(|| {
        let model = handle(model)?;
        let x = slice(x, dim, "x")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model.log_pdf(x)?;
        Ok(())
    })
}

/// Score `∇ log p(x)` written to `out` (`dim` values).
///
/// # Safety
/// `x` and `out` must each point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_score(model: *const NclGmm, x: *const f64, dim: usize, out: *mut f64) -> NclStatus {
    guard(|| {
        let model = handle(model)?;
        let x = slice(x, dim, "x")?;
        let out = slice_mut(out, dim, "out")?;
        let g = model.eval(x)?;
        out.copy_from_slice(&g);
        Ok(())
    })
}

/// `n` exact draws, point by point, into `out` (`n * dim` values).
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ncl_gmm_sample(
    model: *const NclGmm,
    n: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> NclStatus {
    guard(|| {
        let model = handle(model)?;
        check_capacity(n.saturating_mul(model.dim()), out_len)?;
        let s = model.exact_sample(n, &mut Stream::from_seed(seed))?;
        slice_mut(out, out_len, "out")?[..s.as_flat().len()].copy_from_slice(s.as_flat());
        Ok(())
    })
}

/// Posterior mean `x̃ + σ² Ψ(x̃)` with `noisy_model` the noisy-data density.
///
/// # Safety
/// `x_noisy` and `out` must each point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ncl_tweedie_denoise(
    noisy_model: *const NclGmm,
    sigma2: f64,
    x_noisy: *const f64,
    dim: usize,
    out: *mut f64,
) -> NclStatus {
    guard(|| {
        let model = handle(noisy_model)?;
        let x = slice(x_noisy, dim, "x_noisy")?;
        let out = slice_mut(out, dim, "out")?;
        out.copy_from_slice(&tweedie_denoise(model, sigma2, x)?);
        Ok(())
    })
}

/// Runs a chain from `N(0, I)` and writes the `n_steps + 1` states into
/// `out`. `variant` is an [`NclVariant`] value; `mu` is ignored for
/// half-denoising.
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ncl_run_chain(
    score_model: *const NclGmm,
    variant: i32,
    mu: f64,
    sigma2: f64,
    n_steps: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> NclStatus {
    guard(|| {
        let model = handle(score_model)?;
        let variant = match variant {
            0 => Variant::Basic,
            1 => Variant::NoiseCorrected,
            2 => Variant::HalfDenoise,
            v => return Err(Fail(NclStatus::InvalidArgument, format!("unknown variant {v}"))),
        };
        let mu = (variant != Variant::HalfDenoise).then_some(mu);
        let sigma2 = if variant == Variant::Basic { 0.0 } else { sigma2 };
        let config = SamplerConfig::new(variant, mu, sigma2, n_steps, seed)?;
        check_capacity(n_steps.saturating_add(1).saturating_mul(model.dim()), out_len)?;
        let out = slice_mut(out, out_len, "out")?;
        let chain = run_chain(&config, model)?;
        for (t, s) in chain.states().enumerate() {
            out[t * s.len()..(t + 1) * s.len()].copy_from_slice(s);
        }
        Ok(())
    })
}

unsafe fn matrix(ptr: *const f64, dim: usize) -> Result<DMatrix<f64>, Fail> {
    if dim == 0 {
        return Err(Fail(NclStatus::InvalidArgument, "dim must be positive".into()));
    }
    Ok(DMatrix::from_row_slice(dim, dim, slice(ptr, dim * dim, "sigma_score")?))
}

/// Closed-form stationary covariance of the Gaussian iteration whose score
/// has covariance `sigma_score`, step `mu` and correction `sigma2`
/// (0 for plain Langevin). Writes `dim * dim` values, row-major.
///
/// # Safety
/// `sigma_score` and `out` must each point to `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ncl_stationary_covariance(
    sigma_score: *const f64,
    dim: usize,
    mu: f64,
    sigma2: f64,
    out: *mut f64,
) -> NclStatus {
    guard(|| {
        let s = matrix(sigma_score, dim)?;
        let c = stationary_covariance(&s, mu, sigma2)?;
        let out = slice_mut(out, dim * dim, "out")?;
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = c[(i, j)];
            }
        }
        Ok(())
    })
}

/// Spectral norm of `I − mu · sigma_score⁻¹`.
///
/// # Safety
/// `sigma_score` must point to `dim * dim` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn ncl_contraction(sigma_score: *const f64, dim: usize, mu: f64, out: *mut f64) -> NclStatus {
    guard(|| {
        let s = matrix(sigma_score, dim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = contraction_check(&s, mu)?;
        Ok(())
    })
}
