//! C interface to `cmp_abc`.
//!
//! Every function returns a [`CmpAbcStatus`]. On failure a message is kept
//! per thread and read with [`cmpabc_last_error`]. Objects are opaque
//! handles released with their `_free` function; passing NULL to a `_free`
//! function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cmp_abc::cli::cmd_run;
use cmp_abc::cli::config::RunConfig;
use cmp_abc::clustering::{igmm_fit, init_clusters, kmeans_fit, ClusterKind, ClusterModel};
use cmp_abc::features::central_moments;
use cmp_abc::nn::{init_network, read_checkpoint, write_checkpoint, Network};
use cmp_abc::regression::{fit_ols, RegressionModel};
use cmp_abc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpAbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpAbcClusterKind {
    Kmeans = 0,
    Igmm = 1,
}

pub struct CmpAbcNetwork(Network);
pub struct CmpAbcRegression(RegressionModel);
pub struct CmpAbcClusters(ClusterModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CmpAbcStatus {
    match e {
        Error::Config(_) => CmpAbcStatus::Config,
        Error::InvalidArgument(_) => CmpAbcStatus::InvalidArgument,
        Error::Numeric(_) | Error::DimensionMismatch { .. } => CmpAbcStatus::Numeric,
        Error::Io { .. } => CmpAbcStatus::Io,
        _ => CmpAbcStatus::Data,
    }
}

struct Fail(CmpAbcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CmpAbcStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(CmpAbcStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CmpAbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmpAbcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CmpAbcStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Row-major `n x d` matrix as rows.
unsafe fn rows(p: *const f64, n: usize, d: usize) -> Result<Vec<Vec<f64>>, Fail> {
    let len = n.checked_mul(d).ok_or_else(|| invalid("matrix size overflows"))?;
    Ok(slice(p, len, "matrix")?.chunks(d.max(1)).map(<[f64]>::to_vec).collect())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cmpabc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cmpabc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Mean, standard deviation, skewness and kurtosis of `series` into `out[4]`.
///
/// # Safety
/// `series` points to `len` doubles and `out` to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_moments(series: *const f64, len: usize, out: *mut f64) -> CmpAbcStatus {
    guard(|| {
        let m = central_moments(slice(series, len, "series")?)?;
        slice_mut(out, 4, "out")?.copy_from_slice(&m.to_array());
        Ok(())
    })
}

/// Randomly initialized autoencoder with encoder layer sizes `sizes[0..n]`.
///
/// # Safety
/// `sizes` points to `n` values and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_new(
    sizes: *const usize,
    n: usize,
    seed: u64,
    out: *mut *mut CmpAbcNetwork,
) -> CmpAbcStatus {
    guard(|| {
        let net = init_network(slice(sizes, n, "sizes")?, seed)?;
        put(out, CmpAbcNetwork(net))
    })
}

/// Loads a checkpoint written by `cmpabc_network_save` or the `train` command.
///
/// # Safety
/// `path` is a NUL-terminated string and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_load(path: *const c_char, out: *mut *mut CmpAbcNetwork) -> CmpAbcStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        let file =
            std::fs::File::open(&path).map_err(|e| Fail(CmpAbcStatus::Io, format!("{}: {e}", path.display())))?;
        let net = read_checkpoint(std::io::BufReader::new(file))?;
        put(out, CmpAbcNetwork(net))
    })
}

/// # Safety
/// `net` is a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_save(net: *const CmpAbcNetwork, path: *const c_char) -> CmpAbcStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        let path = PathBuf::from(string(path, "path")?);
        let file =
            std::fs::File::create(&path).map_err(|e| Fail(CmpAbcStatus::Io, format!("{}: {e}", path.display())))?;
        write_checkpoint(&net.0, std::io::BufWriter::new(file))?;
        Ok(())
    })
}

/// Input and latent widths of `net`.
///
/// # Safety
/// `net` is a live handle; the output pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_dims(
    net: *const CmpAbcNetwork,
    input_dim: *mut usize,
    latent_dim: *mut usize,
) -> CmpAbcStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        *input_dim.as_mut().ok_or_else(|| null("input_dim"))? = net.0.input_dim();
        *latent_dim.as_mut().ok_or_else(|| null("latent_dim"))? = net.0.latent_dim();
        Ok(())
    })
}

/// Encodes `x[0..x_len]` into `z[0..z_len]`; both lengths must match the network.
///
/// # Safety
/// `net` is a live handle; `x` and `z` cover their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_encode(
    net: *const CmpAbcNetwork,
    x: *const f64,
    x_len: usize,
    z: *mut f64,
    z_len: usize,
) -> CmpAbcStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        let code = net.0.encode(slice(x, x_len, "x")?)?;
        if code.len() != z_len {
            return Err(invalid(format!("latent width is {}, buffer holds {z_len}", code.len())));
        }
        slice_mut(z, z_len, "z")?.copy_from_slice(&code);
        Ok(())
    })
}

/// # Safety
/// `net` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_network_free(net: *mut CmpAbcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Least squares with ridge `lambda` on a row-major `n x d` matrix.
///
/// # Safety
/// `x` holds `n * d` doubles, `y` holds `n`, and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_regression_fit(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    lambda: f64,
    out: *mut *mut CmpAbcRegression,
) -> CmpAbcStatus {
    guard(|| {
        let model = fit_ols(&rows(x, n, d)?, slice(y, n, "y")?, lambda)?;
        put(out, CmpAbcRegression(model))
    })
}

/// Predictions for a row-major `n x d` matrix into `out[0..n]`.
///
/// # Safety
/// `model` is a live handle; `x` holds `n * d` doubles and `out` `n`.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_regression_predict(
    model: *const CmpAbcRegression,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> CmpAbcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = slice_mut(out, n, "out")?;
        for (o, row) in out.iter_mut().zip(rows(x, n, d)?) {
            *o = model.0.predict_one(&row)?;
        }
        Ok(())
    })
}

/// Copies the coefficients into `coef[0..d]` and the intercept into `intercept`.
///
/// # Safety
/// `model` is a live handle; the output pointers cover their lengths.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_regression_coefficients(
    model: *const CmpAbcRegression,
    coef: *mut f64,
    d: usize,
    intercept: *mut f64,
) -> CmpAbcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if d != model.0.dim() {
            return Err(invalid(format!(
                "model has {} coefficients, buffer holds {d}",
                model.0.dim()
            )));
        }
        slice_mut(coef, d, "coef")?.copy_from_slice(model.0.coefficients());
        *intercept.as_mut().ok_or_else(|| null("intercept"))? = model.0.intercept();
        Ok(())
    })
}

/// # Safety
/// `model` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_regression_free(model: *mut CmpAbcRegression) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits `k` clusters (the initial `T` for iGMM) to a row-major `n x d`
/// matrix. iGMM prunes below `1 / (10 k)`.
///
/// # Safety
/// `z` holds `n * d` doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_clusters_fit(
    kind: CmpAbcClusterKind,
    z: *const f64,
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
    out: *mut *mut CmpAbcClusters,
) -> CmpAbcStatus {
    guard(|| {
        let z = rows(z, n, d)?;
        let kind = match kind {
            CmpAbcClusterKind::Kmeans => ClusterKind::Kmeans,
            CmpAbcClusterKind::Igmm => ClusterKind::Igmm,
        };
        let start = init_clusters(&z, k, kind, 1.0, seed)?;
        let fit = match kind {
            ClusterKind::Kmeans => kmeans_fit(&start, &z, max_iter)?,
            ClusterKind::Igmm => igmm_fit(&start, &z, max_iter, Some(1.0 / (10.0 * k as f64)))?,
        };
        put(out, CmpAbcClusters(fit.model))
    })
}

/// Number of clusters still active.
///
/// # Safety
/// `model` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_clusters_count(model: *const CmpAbcClusters, out: *mut usize) -> CmpAbcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("clusters"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = model.0.t_active();
        Ok(())
    })
}

/// Index of the cluster `z[0..d]` is assigned to.
///
/// # Safety
/// `model` is a live handle, `z` holds `d` doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_clusters_nearest(
    model: *const CmpAbcClusters,
    z: *const f64,
    d: usize,
    out: *mut usize,
) -> CmpAbcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("clusters"))?;
        let idx = model.0.nearest_index(slice(z, d, "z")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = idx;
        Ok(())
    })
}

/// # Safety
/// `model` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_clusters_free(model: *mut CmpAbcClusters) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the full experiment described by `config_text` (the `key = value`
/// format of the command-line tool) and writes the report files to `out_dir`.
/// The files are written even when an attempt fails.
///
/// # Safety
/// Both arguments are NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cmpabc_run_experiment(config_text: *const c_char, out_dir: *const c_char) -> CmpAbcStatus {
    guard(|| {
        let cfg = RunConfig::from_text(&string(config_text, "config_text")?)?;
        let out = PathBuf::from(string(out_dir, "out_dir")?);
        match cmd_run(&cfg, &out)? {
            (_, Some(e)) => Err(e.into()),
            (_, None) => Ok(()),
        }
    })
}
