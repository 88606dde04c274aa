//! C ABI over the `bdpd` estimators.
//!
//! Every function returns a [`BdpdStatus`]. On failure the message is kept
//! per thread and can be read with [`bdpd_last_error_message`]. Handles are
//! opaque; release them with the matching `*_free` function.
//!
//! Output arrays are caller-allocated. Functions that fill one take its
//! capacity and write the required length to `out_len`, so a call with
//! capacity 0 can be used to size the buffer; a short buffer yields
//! [`BdpdStatus::BufferTooSmall`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bdpd::asymptotics::sandwich;
use bdpd::divergence::{objective_gradient, sample_objective};
use bdpd::optimize::{chain_fit, global_fit, FitResult, LambdaGrid, StartSpec, Tolerances};
use bdpd::{BridgeConfig, Error, Family, Theta};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    EmptyData = 3,
    Unsupported = 4,
    /// The numerics failed: quadrature, optimization or a singular matrix.
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdpdFamilyKind {
    ExponentialScale = 0,
    /// Scale of a normal with known mean `fixed`.
    NormalScale = 1,
    /// Mean of a normal with known standard deviation `fixed`.
    NormalMean = 2,
    NormalLocationScale = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BdpdFamily {
    pub kind: BdpdFamilyKind,
    /// Known mean or standard deviation; ignored by the other families.
    pub fixed: f64,
}

impl BdpdFamily {
    fn to_family(self) -> Family {
        match self.kind {
            BdpdFamilyKind::ExponentialScale => Family::ExponentialScale,
            BdpdFamilyKind::NormalScale => Family::NormalScale { mean: self.fixed },
            BdpdFamilyKind::NormalMean => Family::NormalMean { sigma: self.fixed },
            BdpdFamilyKind::NormalLocationScale => Family::NormalLocationScale,
        }
    }
}

/// An owned copy of a dataset.
pub struct BdpdData {
    values: Vec<f64>,
}

/// The global minimizer of one fit.
pub struct BdpdFit {
    best: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BdpdStatus {
    match e {
        Error::EmptyData => BdpdStatus::EmptyData,
        Error::Unsupported(_) => BdpdStatus::Unsupported,
        e if e.is_numerical() => BdpdStatus::Numerical,
        _ => BdpdStatus::InvalidInput,
    }
}

struct Fail(BdpdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(BdpdStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> BdpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BdpdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BdpdStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn data_ref<'a>(data: *const BdpdData) -> Result<&'a [f64], Fail> {
    data.as_ref().map(|d| d.values.as_slice()).ok_or_else(|| null("data"))
}

unsafe fn write_out(values: &[f64], out: *mut f64, cap: usize, out_len: *mut usize) -> Result<(), Fail> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    if cap < values.len() {
        return Err(Fail(
            BdpdStatus::BufferTooSmall,
            format!("output needs {} values, capacity is {cap}", values.len()),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bdpd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bdpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` observations into a new handle.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdpd_data_new(values: *const f64, len: usize, out: *mut *mut BdpdData) -> BdpdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = slice(values, len, "values")?;
        if v.is_empty() {
            return Err(Error::EmptyData.into());
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("observation {i} is not finite")).into());
        }
        *out = Box::into_raw(Box::new(BdpdData { values: v.to_vec() }));
        Ok(())
    })
}

/// # Safety
/// `data` must come from [`bdpd_data_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bdpd_data_free(data: *mut BdpdData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

#[no_mangle]
pub extern "C" fn bdpd_family_dim(family: BdpdFamily) -> usize {
    family.to_family().dim()
}

/// Sample objective at `theta`.
///
/// # Safety
/// `data` must be a live handle, `theta` must hold `dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdpd_objective(
    data: *const BdpdData,
    family: BdpdFamily,
    alpha: f64,
    lambda: f64,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
) -> BdpdStatus {
    guard(|| {
        let x = data_ref(data)?;
        let th = Theta(slice(theta, dim, "theta")?.to_vec());
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sample_objective(&family.to_family(), &th, x, &BridgeConfig::new(alpha, lambda)?)?;
        Ok(())
    })
}

/// Gradient of the sample objective at `theta`.
///
/// # Safety
/// As for [`bdpd_objective`]; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdpd_gradient(
    data: *const BdpdData,
    family: BdpdFamily,
    alpha: f64,
    lambda: f64,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> BdpdStatus {
    guard(|| {
        let x = data_ref(data)?;
        let th = Theta(slice(theta, dim, "theta")?.to_vec());
        let g = objective_gradient(&family.to_family(), &th, x, &BridgeConfig::new(alpha, lambda)?)?;
        write_out(g.as_slice(), out, cap, out_len)
    })
}

/// Multistart global fit at one `(alpha, lambda)`.
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdpd_fit(
    data: *const BdpdData,
    family: BdpdFamily,
    alpha: f64,
    lambda: f64,
    seed: u64,
    out: *mut *mut BdpdFit,
) -> BdpdStatus {
    guard(|| {
        let x = data_ref(data)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fam = family.to_family();
        let fit = global_fit(
            &fam,
            x,
            &BridgeConfig::new(alpha, lambda)?,
            &StartSpec::standard(&fam, x, seed),
            &Tolerances::default(),
        )?;
        *out = Box::into_raw(Box::new(BdpdFit { best: fit.best }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`bdpd_fit`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bdpd_fit_free(fit: *mut BdpdFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdpd_fit_theta(fit: *const BdpdFit, out: *mut f64, cap: usize, out_len: *mut usize) -> BdpdStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        write_out(f.best.theta_hat.as_slice(), out, cap, out_len)
    })
}

/// Objective value, gradient norm and convergence flag of a fit.
///
/// # Safety
/// `fit` must be a live handle; each output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn bdpd_fit_summary(
    fit: *const BdpdFit,
    objective: *mut f64,
    gradient_norm: *mut f64,
    converged: *mut bool,
) -> BdpdStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        if !objective.is_null() {
            *objective = f.best.objective;
        }
        if !gradient_norm.is_null() {
            *gradient_norm = f.best.gradient_norm;
        }
        if !converged.is_null() {
            *converged = f.best.converged;
        }
        Ok(())
    })
}

/// Chain estimates over `lambdas` (descending from 1 to 0), row-major with
/// one row of `dim` values per grid point.
///
/// # Safety
/// `lambdas` must hold `n_lambdas` doubles; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bdpd_chain(
    data: *const BdpdData,
    family: BdpdFamily,
    alpha: f64,
    lambdas: *const f64,
    n_lambdas: usize,
    seed: u64,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> BdpdStatus {
    guard(|| {
        let x = data_ref(data)?;
        let grid = LambdaGrid::new(slice(lambdas, n_lambdas, "lambdas")?.to_vec())?;
        let fam = family.to_family();
        let path = chain_fit(&fam, x, alpha, &grid, &StartSpec::standard(&fam, x, seed), &Tolerances::default())?;
        let flat: Vec<f64> = path.fits.iter().flat_map(|f| f.theta_hat.as_slice().to_vec()).collect();
        write_out(&flat, out, cap, out_len)
    })
}

/// Sandwich variance `V` at `theta`, row-major `dim × dim`, and its determinant.
///
/// # Safety
/// As for [`bdpd_gradient`]; `det` may be null.
#[no_mangle]
pub unsafe extern "C" fn bdpd_sandwich(
    data: *const BdpdData,
    family: BdpdFamily,
    alpha: f64,
    lambda: f64,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
    det: *mut f64,
) -> BdpdStatus {
    guard(|| {
        let x = data_ref(data)?;
        let th = Theta(slice(theta, dim, "theta")?.to_vec());
        let s = sandwich(&family.to_family(), &th, x, &BridgeConfig::new(alpha, lambda)?)?;
        let rows: Vec<f64> = s.v.transpose().as_slice().to_vec();
        write_out(&rows, out, cap, out_len)?;
        if !det.is_null() {
            *det = s.det_v;
        }
        Ok(())
    })
}
