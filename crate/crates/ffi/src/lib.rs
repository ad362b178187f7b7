//! C ABI over `elt_tail`.
//!
//! Tables and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`EltStatus`]; on failure the
//! message is kept per thread and read back with [`elt_last_error`].
//! Thresholds and losses cross the boundary in currency units.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elt_tail::bounds::{exceedance_curve, BoundMethod, BoundRequest};
use elt_tail::elt::{aggregate_moments, compress_elt, parse_elt, to_compound_model};
use elt_tail::exact::{design_sample_size, monte_carlo_curve, panjer_distribution, DesignSpec, McConfig, PanjerConfig};
use elt_tail::{CompoundModel, Error, EventLossTable};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EltStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Unsupported = 5,
    Domain = 6,
    Numeric = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EltBound {
    Markov = 0,
    Cantelli = 1,
    Moment = 2,
    Chernoff = 3,
}

/// Opaque event loss table.
pub struct EltTable(EventLossTable);

/// Opaque compound Poisson model plus the currency value of its loss unit.
pub struct EltModel {
    model: CompoundModel,
    loss_unit: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: EltStatus, msg: impl Into<String>) -> EltStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> EltStatus {
    match err {
        Error::Parse { .. } => EltStatus::Parse,
        Error::Validation(_) => EltStatus::Validation,
        Error::Unsupported(_) => EltStatus::Unsupported,
        Error::Domain(_) => EltStatus::Domain,
        Error::Numeric(_) => EltStatus::Numeric,
        Error::Io(_) => EltStatus::Io,
    }
}

struct Fail(EltStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EltStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, clearing the last error on success and recording it otherwise.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> EltStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EltStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => fail(status, msg),
        Err(_) => fail(EltStatus::Panic, "internal panic"),
    }
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(EltStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_table(out: *mut *mut EltTable, table: EventLossTable) -> Result<(), Fail> {
    put(out, Box::into_raw(Box::new(EltTable(table))), "out")
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn elt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses CSV text (NUL-terminated) into a new table.
///
/// # Safety
/// `csv` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_table_parse_csv(csv: *const c_char, out: *mut *mut EltTable) -> EltStatus {
    guard(|| {
        let text = as_str(csv, "csv")?;
        put_table(out, parse_elt(text.as_bytes())?)
    })
}

/// Reads a CSV file into a new table.
///
/// # Safety
/// `path` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_table_read_file(path: *const c_char, out: *mut *mut EltTable) -> EltStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let file = std::fs::File::open(path).map_err(Error::from)?;
        put_table(out, parse_elt(std::io::BufReader::new(file))?)
    })
}

/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn elt_table_free(table: *mut EltTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn elt_table_rows(table: *const EltTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Sum of row rates, or NaN for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn elt_table_total_rate(table: *const EltTable) -> f64 {
    table.as_ref().map_or(f64::NAN, |t| t.0.total_rate())
}

/// Currency value of one stored loss unit, or NaN for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn elt_table_loss_unit(table: *const EltTable) -> f64 {
    table.as_ref().map_or(f64::NAN, |t| t.0.loss_unit())
}

/// Rounds losses to `d` decimal places and merges equal-loss rows.
///
/// # Safety
/// `table` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_table_compress(table: *const EltTable, d: i32, out: *mut *mut EltTable) -> EltStatus {
    guard(|| {
        let t = as_ref(table, "table")?;
        put_table(out, compress_elt(&t.0, d)?)
    })
}

/// Replaces fixed losses by Gamma losses with coefficient of variation `theta`.
///
/// # Safety
/// `table` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_table_thicken(table: *const EltTable, theta: f64, out: *mut *mut EltTable) -> EltStatus {
    guard(|| {
        let t = as_ref(table, "table")?;
        put_table(out, t.0.thicken(theta)?)
    })
}

/// Caps every event loss at `cap` currency units.
///
/// # Safety
/// `table` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_table_with_cap(table: *const EltTable, cap: f64, out: *mut *mut EltTable) -> EltStatus {
    guard(|| {
        let t = as_ref(table, "table")?;
        put_table(out, t.0.with_cap(cap)?)
    })
}

/// Builds the compound Poisson model for horizon `t` years.
///
/// # Safety
/// `table` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_model_new(table: *const EltTable, t: f64, out: *mut *mut EltModel) -> EltStatus {
    guard(|| {
        let tab = as_ref(table, "table")?;
        let model = to_compound_model(&tab.0, t)?;
        let handle = EltModel { model, loss_unit: tab.0.loss_unit() };
        put(out, Box::into_raw(Box::new(handle)), "out")
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn elt_model_free(model: *mut EltModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Mean of the aggregate loss in currency units.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_model_mean(model: *const EltModel, out: *mut f64) -> EltStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        put(out, m.model.mean() * m.loss_unit, "out")
    })
}

/// Variance of the aggregate loss in squared currency units.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn elt_model_variance(model: *const EltModel, out: *mut f64) -> EltStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        put(out, m.model.variance() * m.loss_unit * m.loss_unit, "out")
    })
}

/// Raw aggregate moments `E(S^0) .. E(S^k_max)` in stored loss units;
/// `out` holds `k_max + 1` values.
///
/// # Safety
/// `model` must be a live handle and `out` must have room for `k_max + 1`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn elt_model_moments(model: *const EltModel, k_max: u32, out: *mut f64) -> EltStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let values = aggregate_moments(&m.model, k_max)?;
        out_slice(out, values.len(), "out")?.copy_from_slice(&values);
        Ok(())
    })
}

/// Upper bounds on Pr(S >= s) at `n` ascending positive thresholds.
///
/// # Safety
/// `thresholds` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn elt_bound(
    model: *const EltModel,
    method: EltBound,
    thresholds: *const f64,
    n: usize,
    out: *mut f64,
) -> EltStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let s: Vec<f64> = in_slice(thresholds, n, "thresholds")?.iter().map(|s| s / m.loss_unit).collect();
        let dest = out_slice(out, n, "out")?;
        let method = match method {
            EltBound::Markov => BoundMethod::Markov,
            EltBound::Cantelli => BoundMethod::Cantelli,
            EltBound::Moment => BoundMethod::Moment,
            EltBound::Chernoff => BoundMethod::Chernoff,
        };
        let curve = exceedance_curve(&BoundRequest::new(m.model.clone(), s, method)?)?;
        dest.copy_from_slice(&curve.values);
        Ok(())
    })
}

/// Monte Carlo estimates with 95% Jeffreys intervals at `n` thresholds.
/// `lower` and `upper` may be null.
///
/// # Safety
/// `thresholds` and `estimate` must hold `n` doubles; `lower`/`upper` must
/// be null or hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn elt_monte_carlo(
    model: *const EltModel,
    thresholds: *const f64,
    n: usize,
    nsim: usize,
    seed: u64,
    estimate: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> EltStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let s: Vec<f64> = in_slice(thresholds, n, "thresholds")?.iter().map(|s| s / m.loss_unit).collect();
        let curve = monte_carlo_curve(&m.model, &s, &McConfig::new(nsim, seed))?;
        out_slice(estimate, n, "estimate")?.copy_from_slice(&curve.values);
        if let Some((lo, hi)) = &curve.interval {
            if !lower.is_null() {
                out_slice(lower, n, "lower")?.copy_from_slice(lo);
            }
            if !upper.is_null() {
                out_slice(upper, n, "upper")?.copy_from_slice(hi);
            }
        }
        Ok(())
    })
}

/// Pr(S >= s) by Panjer recursion after quantile expansion (`n_q` rows per
/// random loss) and compression at `d`, for horizon `t` years.
///
/// # Safety
/// `table` must be a live handle; `thresholds` and `out` must hold `n`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn elt_panjer(
    table: *const EltTable,
    t: f64,
    d: i32,
    n_q: usize,
    thresholds: *const f64,
    n: usize,
    out: *mut f64,
) -> EltStatus {
    guard(|| {
        let tab = as_ref(table, "table")?;
        let s = in_slice(thresholds, n, "thresholds")?;
        let dest = out_slice(out, n, "out")?;
        let top = s.iter().copied().fold(0.0, f64::max) * 10f64.powi(d);
        if !(top.is_finite() && top < elt_tail::exact::MAX_PANJER_POINTS as f64) {
            return Err(Fail(EltStatus::Numeric, format!("Panjer ceiling {top} is infeasible")));
        }
        let cfg = PanjerConfig { n_q, s_max: (top.ceil() as usize).max(1), d };
        let dist = panjer_distribution(&tab.0, t, &cfg)?;
        for (slot, &x) in dest.iter_mut().zip(s) {
            *slot = dist.exceedance_at(x)?;
        }
        Ok(())
    })
}

/// Probability that the Jeffreys upper end stays at or below `kappa0`
/// when the true probability is `p0`, for each of `n` sample sizes.
///
/// # Safety
/// `sizes` and `out` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn elt_design_success(
    kappa0: f64,
    p0: f64,
    alpha_level: f64,
    sizes: *const u64,
    n: usize,
    out: *mut f64,
) -> EltStatus {
    guard(|| {
        let ns = in_slice(sizes, n, "sizes")?;
        let dest = out_slice(out, n, "out")?;
        let spec = DesignSpec { kappa0, p0, alpha_level, ..DesignSpec::default() };
        for (slot, (_, p)) in dest.iter_mut().zip(design_sample_size(&spec, ns)?) {
            *slot = p;
        }
        Ok(())
    })
}
