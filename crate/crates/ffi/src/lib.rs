//! C interface to `fractal-fourier`.
//!
//! Objects are opaque heap handles created by `*_from_json` / `*_build`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`FfStatus`]; on failure a description is available from
//! [`ff_last_error_message`] on the same thread until the next failing call.
//!
//! Output pointers are only written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fractal_fourier::bounds::{
    high_dim_condition, log_pushforward_sigma, prop48_conditions, symmetric_thresholds, theorem11_sigma,
    three_set_condition, two_set_condition, ConditionReport,
};
use fractal_fourier::dimension::{build_profile, DimensionProfile, ProfileOverrides};
use fractal_fourier::fourier::{mu_hat_with, pushforward_hat, EvalOptions, FrequencySample, MapSpec, PushforwardMap};
use fractal_fourier::ifs::{Budget, IfsFile, SelfSimilarIfs};
use fractal_fourier::FractalError;

/// Status codes; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    /// A required pointer was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    ConfigInvalid = 2,
    InconsistentProfile = 3,
    ResourceExceeded = 4,
    Internal = 5,
}

/// A self-similar IFS together with its weights.
pub struct FfIfs(SelfSimilarIfs);

/// A smooth map used for pushforward transforms.
pub struct FfMap(PushforwardMap);

/// Dimension exponents of a measure.
pub struct FfProfile(DimensionProfile);

/// One transform value with its error bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FfSample {
    pub re: f64,
    pub im: f64,
    pub error_bound: f64,
    pub leaves_used: u64,
    /// False when the bound rests on estimated derivative bounds.
    pub certified: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FfProfileSummary {
    pub k: usize,
    pub kappa2: f64,
    pub kappa_star: f64,
    pub d_inf: f64,
    pub ad_regular: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FfDecayBound {
    pub sigma: f64,
    pub best_p: f64,
    /// NaN when `sigma` is zero.
    pub gamma: f64,
    pub conjectural_ceiling: f64,
    pub applicable: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FfCondition {
    pub holds: bool,
    /// Left side minus right side of the deciding inequality.
    pub margin: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Arg(String),
    Lib(FractalError),
}

impl From<FractalError> for Failure {
    fn from(e: FractalError) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &FractalError) -> FfStatus {
    match e.exit_code() {
        3 => FfStatus::InconsistentProfile,
        4 => FfStatus::ResourceExceeded,
        5 => FfStatus::Internal,
        _ => FfStatus::ConfigInvalid,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FfStatus::Ok,
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            FfStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            FfStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Arg(format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::Arg(format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::Arg(format!("`{name}` is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() || len == 0 {
        return Err(Failure::Arg(format!("`{name}` must be a non-empty array")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn options(tol: f64, max_leaves: u64) -> EvalOptions {
    let budget = if max_leaves == 0 { Budget::default() } else { Budget::new(max_leaves) };
    EvalOptions::new(tol).with_budget(budget)
}

fn sample(s: &FrequencySample) -> FfSample {
    FfSample {
        re: s.value.re,
        im: s.value.im,
        error_bound: s.error_bound,
        leaves_used: s.leaves_used,
        certified: s.certified,
    }
}

fn condition(r: &ConditionReport) -> FfCondition {
    FfCondition {
        holds: r.holds,
        margin: r.margin,
    }
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parses an IFS description (the same JSON as the command-line IFS files).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_ifs_from_json(json: *const c_char, out: *mut *mut FfIfs) -> FfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let ifs = IfsFile::from_json(text)?.build()?;
        *out = Box::into_raw(Box::new(FfIfs(ifs)));
        Ok(())
    })
}

/// # Safety
/// `ifs` must be null or a handle from [`ff_ifs_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_ifs_free(ifs: *mut FfIfs) {
    if !ifs.is_null() {
        drop(Box::from_raw(ifs));
    }
}

/// Dimension of the space the IFS acts on, or 0 for a null handle.
///
/// # Safety
/// `ifs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_ifs_ambient_dim(ifs: *const FfIfs) -> usize {
    ifs.as_ref().map_or(0, |i| i.0.ambient_dim())
}

/// Similarity dimension of the attractor (root of `Σ rᵢ^s = 1`).
///
/// # Safety
/// `ifs` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_similarity_dimension(ifs: *const FfIfs, out: *mut f64) -> FfStatus {
    guard(|| {
        let ifs = ref_arg(ifs, "ifs")?;
        let out = out_arg(out, "out")?;
        *out = fractal_fourier::dimension::similarity_dimension_set(&ifs.0.ratios())?;
        Ok(())
    })
}

/// Builds the dimension profile of the IFS measure. `overrides_json` may be
/// null; otherwise it holds exponent overrides such as `{"kappa2": 0.5}`.
///
/// # Safety
/// `ifs` must be a live handle, `overrides_json` null or NUL-terminated,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_profile_build(
    ifs: *const FfIfs,
    overrides_json: *const c_char,
    out: *mut *mut FfProfile,
) -> FfStatus {
    guard(|| {
        let ifs = ref_arg(ifs, "ifs")?;
        let out = out_arg(out, "out")?;
        let overrides = if overrides_json.is_null() {
            ProfileOverrides::default()
        } else {
            let text = str_arg(overrides_json, "overrides_json")?;
            serde_json::from_str(text).map_err(|source| FractalError::Json {
                context: "profile overrides".into(),
                source,
            })?
        };
        let profile = build_profile(&ifs.0, &overrides)?;
        *out = Box::into_raw(Box::new(FfProfile(profile)));
        Ok(())
    })
}

/// A profile given directly by its exponents, checked for consistency.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_profile_manual(
    k: usize,
    kappa2: f64,
    kappa_star: f64,
    d_inf: f64,
    out: *mut *mut FfProfile,
) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let profile = DimensionProfile::manual(k, kappa2, kappa_star, d_inf).validated()?;
        *out = Box::into_raw(Box::new(FfProfile(profile)));
        Ok(())
    })
}

/// # Safety
/// `profile` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_profile_get(profile: *const FfProfile, out: *mut FfProfileSummary) -> FfStatus {
    guard(|| {
        let p = &ref_arg(profile, "profile")?.0;
        let out = out_arg(out, "out")?;
        *out = FfProfileSummary {
            k: p.k,
            kappa2: p.kappa2.value,
            kappa_star: p.kappa_star.value,
            d_inf: p.d_inf.value,
            ad_regular: p.ad_regular,
        };
        Ok(())
    })
}

/// # Safety
/// `profile` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_profile_free(profile: *mut FfProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Fourier transform of the IFS measure at `xi` (length = ambient dimension)
/// with absolute error at most `tol`. `max_leaves = 0` uses the default budget.
///
/// # Safety
/// `ifs` must be a live handle, `xi` point to `len` doubles, `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn ff_mu_hat(
    ifs: *const FfIfs,
    xi: *const f64,
    len: usize,
    tol: f64,
    max_leaves: u64,
    out: *mut FfSample,
) -> FfStatus {
    guard(|| {
        let ifs = ref_arg(ifs, "ifs")?;
        let xi = slice_arg(xi, len, "xi")?;
        let out = out_arg(out, "out")?;
        *out = sample(&mu_hat_with(&ifs.0, xi, &options(tol, max_leaves))?);
        Ok(())
    })
}

/// Parses a map description such as `{"kind": "square"}` for an IFS in ℝ^k.
///
/// # Safety
/// `json` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_map_from_json(json: *const c_char, k: usize, out: *mut *mut FfMap) -> FfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let spec: MapSpec = serde_json::from_str(text).map_err(|source| FractalError::Json {
            context: "map".into(),
            source,
        })?;
        *out = Box::into_raw(Box::new(FfMap(spec.build(k)?)));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_map_free(map: *mut FfMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Fourier transform of the image of the IFS measure under `map`.
///
/// # Safety
/// As for [`ff_mu_hat`]; `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_pushforward_hat(
    ifs: *const FfIfs,
    map: *const FfMap,
    xi: *const f64,
    len: usize,
    tol: f64,
    max_leaves: u64,
    out: *mut FfSample,
) -> FfStatus {
    guard(|| {
        let ifs = ref_arg(ifs, "ifs")?;
        let map = ref_arg(map, "map")?;
        let xi = slice_arg(xi, len, "xi")?;
        let out = out_arg(out, "out")?;
        *out = sample(&pushforward_hat(&ifs.0, &map.0, xi, &options(tol, max_leaves))?);
        Ok(())
    })
}

/// Decay exponent for pushforwards of a measure with this profile.
///
/// # Safety
/// `profile` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_decay_exponent(profile: *const FfProfile, out: *mut FfDecayBound) -> FfStatus {
    guard(|| {
        let p = ref_arg(profile, "profile")?;
        let out = out_arg(out, "out")?;
        let b = theorem11_sigma(&p.0);
        *out = FfDecayBound {
            sigma: b.sigma,
            best_p: b.best_p,
            gamma: b.gamma.unwrap_or(f64::NAN),
            conjectural_ceiling: b.conjectural_ceiling,
            applicable: b.applicable,
        };
        Ok(())
    })
}

/// Common dimensions above which products of two (`t2`) or three (`t3`)
/// equal-dimension sets are guaranteed large.
///
/// # Safety
/// `t2` and `t3` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ff_symmetric_thresholds(t2: *mut f64, t3: *mut f64) -> FfStatus {
    guard(|| {
        let t2 = out_arg(t2, "t2")?;
        let t3 = out_arg(t3, "t3")?;
        let t = symmetric_thresholds();
        *t2 = t.t2;
        *t3 = t.t3;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_two_set_condition(dim_e: f64, dim_f: f64, out: *mut FfCondition) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = condition(&two_set_condition(dim_e, dim_f)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_three_set_condition(
    dim_e: f64,
    dim_f: f64,
    dim_g: f64,
    out: *mut FfCondition,
) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = condition(&three_set_condition(dim_e, dim_f, dim_g)?);
        Ok(())
    })
}

/// Product-measure condition from the correlation dimensions of two measures.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_measure_product_condition(
    kappa2_mu: f64,
    kappa2_nu: f64,
    nu_ad_regular: bool,
    out: *mut FfCondition,
) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = condition(&prop48_conditions(kappa2_mu, kappa2_nu, nu_ad_regular)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_high_dim_condition(k: usize, kappa2: f64, out: *mut FfCondition) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = condition(&high_dim_condition(k, kappa2)?);
        Ok(())
    })
}

/// Decay exponent of the image under `log` of a measure with correlation
/// dimension `kappa2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_log_pushforward_sigma(kappa2: f64, out: *mut f64) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = log_pushforward_sigma(kappa2)?;
        Ok(())
    })
}
