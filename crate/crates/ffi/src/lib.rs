//! C interface to `latentfactor`.
//!
//! Objects cross the boundary as opaque handles created by `lf_*_read`,
//! `lf_*_fit` and similar constructors and released with the matching
//! `lf_*_free`. Every fallible function returns an [`LfStatus`]; on failure
//! [`lf_last_error_message`] describes the most recent error on the calling
//! thread. Panics never unwind into the caller: they are reported as
//! `LF_STATUS_PANIC`.
//!
//! Output arrays are caller-allocated. A function writing `n` values into a
//! buffer of length `len < n` fails with `LF_STATUS_BUFFER_TOO_SMALL` and
//! leaves the buffer untouched.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use latentfactor::container::{read_dataset, read_direction, read_model, write_container, Record};
use latentfactor::dataset::{generate_synthetic, LatentDataset, SyntheticSpec};
use latentfactor::directions::{
    all_directions, apply_edit, DirectionKind, EditRequest, SemanticDirection,
};
use latentfactor::recovery::{reconstruct, ParamForm, Recoverer, RecoveryConfig};
use latentfactor::{ErrorCategory, TensorModel};
use nalgebra::DVector;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Invalid argument or configuration.
    InvalidArgument = 2,
    /// Missing, unreadable or corrupt file.
    File = 3,
    /// Non-finite values or a degenerate model.
    Numeric = 4,
    /// Shape, index or layout mismatch.
    Invariant = 5,
    /// An output buffer is shorter than the result.
    BufferTooSmall = 6,
    /// Internal error; the library state is unchanged.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfParamForm {
    RankOne = 0,
    FullRank = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfDirectionKind {
    Expression = 0,
    Rotation = 1,
}

/// Recovery settings; fill with `lf_recovery_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LfRecoveryConfig {
    /// Tikhonov weights for the person, expression, intensity and rotation parameters.
    pub lambda1: [f64; 4],
    /// Sum-to-one weights, same order.
    pub lambda2: [f64; 4],
    pub max_iters: usize,
    pub learning_rate: f64,
    pub tolerance: f64,
    pub closed_form_max_params: usize,
}

/// Outcome of one recovery.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LfRecoveryResult {
    /// `‖ŵ − w‖²`.
    pub final_loss: f64,
    /// Loss plus regularization (rank one) or the loss (full rank).
    pub objective: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Opaque latent dataset.
pub struct LfDataset(LatentDataset);

/// Opaque fitted tensor model.
pub struct LfModel(TensorModel);

/// Opaque semantic edit direction.
pub struct LfDirection {
    inner: SemanticDirection,
    name: CString,
}

impl LfDirection {
    fn new(inner: SemanticDirection) -> Self {
        // Names come from dataset labels, which may hold an interior NUL.
        let name = CString::new(inner.name().replace('\0', "")).expect("NUL removed");
        Self { inner, name }
    }
}

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("{0} must not be NULL")]
    Null(&'static str),
    #[error("{0}")]
    Argument(String),
    #[error("{what} needs room for {needed} values, buffer holds {available}")]
    BufferTooSmall {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Core(#[from] latentfactor::Error),
}

impl FfiError {
    fn status(&self) -> LfStatus {
        match self {
            FfiError::Null(_) => LfStatus::NullPointer,
            FfiError::Argument(_) => LfStatus::InvalidArgument,
            FfiError::BufferTooSmall { .. } => LfStatus::BufferTooSmall,
            FfiError::Core(e) => match e.category() {
                ErrorCategory::Args => LfStatus::InvalidArgument,
                ErrorCategory::File => LfStatus::File,
                ErrorCategory::Numeric => LfStatus::Numeric,
                ErrorCategory::Invariant => LfStatus::Invariant,
            },
        }
    }
}

type FfiResult<T = ()> = Result<T, FfiError>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            LfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(FfiError::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(FfiError::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(FfiError::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| FfiError::Argument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `values` into the caller's buffer.
unsafe fn write_out(values: &[f64], p: *mut f64, len: usize, what: &'static str) -> FfiResult {
    if len < values.len() {
        return Err(FfiError::BufferTooSmall {
            what,
            needed: values.len(),
            available: len,
        });
    }
    if values.is_empty() {
        return Ok(());
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    std::slice::from_raw_parts_mut(p, values.len()).copy_from_slice(values);
    Ok(())
}

fn into_handle<T>(value: T, out: &mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none failed.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

// ---------------------------------------------------------------------------
// Datasets

/// Draws a synthetic dataset. `dims` is `{D, P, E, I, R}`.
///
/// # Safety
/// `dims` must point to 5 values and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_synthetic(
    dims: *const usize,
    seed: u64,
    noise_sigma: f64,
    out: *mut *mut LfDataset,
) -> LfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let dims: [usize; 5] = in_dims(dims, "dims")?;
        let spec = SyntheticSpec::new(dims, seed).with_noise(noise_sigma);
        let (ds, _) = generate_synthetic(&spec)?;
        into_handle(LfDataset(ds), out);
        Ok(())
    })
}

unsafe fn in_dims<const N: usize>(p: *const usize, what: &'static str) -> FfiResult<[usize; N]> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, N)
        .try_into()
        .expect("N values"))
}

/// Reads a dataset container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_read(
    path: *const c_char,
    out: *mut *mut LfDataset,
) -> LfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ds = read_dataset(&path_arg(path)?)?;
        into_handle(LfDataset(ds), out);
        Ok(())
    })
}

/// Writes a dataset container (32-bit values).
///
/// # Safety
/// `ds` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_write(ds: *const LfDataset, path: *const c_char) -> LfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        write_container(&Record::Dataset(ds.0.clone()), &path_arg(path)?)?;
        Ok(())
    })
}

/// Writes `{D, P, E, I, R}` to `out_dims`.
///
/// # Safety
/// `ds` must be a live handle; `out_dims` must hold 5 values.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_dims(ds: *const LfDataset, out_dims: *mut usize) -> LfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        if out_dims.is_null() {
            return Err(FfiError::Null("out_dims"));
        }
        std::slice::from_raw_parts_mut(out_dims, 5).copy_from_slice(&ds.0.dims());
        Ok(())
    })
}

/// Copies the latent of grid cell `{p, e, i, r}` into `out`.
///
/// # Safety
/// `cell` must hold 4 values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_latent(
    ds: *const LfDataset,
    cell: *const usize,
    out: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let w = ds.0.latent(in_dims(cell, "cell")?)?;
        write_out(w.as_slice(), out, out_len, "latent")
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_free(ds: *mut LfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---------------------------------------------------------------------------
// Models

/// Fits a model to a dataset.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_model_fit(ds: *const LfDataset, out: *mut *mut LfModel) -> LfStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let out = out_ref(out, "out")?;
        let f = latentfactor::fit(&ds.0)?;
        into_handle(LfModel(f.model), out);
        Ok(())
    })
}

/// Reads a model container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_model_read(path: *const c_char, out: *mut *mut LfModel) -> LfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let m = read_model(&path_arg(path)?)?;
        into_handle(LfModel(m), out);
        Ok(())
    })
}

/// Writes a model container at full precision.
///
/// # Safety
/// `m` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lf_model_write(m: *const LfModel, path: *const c_char) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        write_container(&Record::Model(m.0.clone()), &path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_model_latent_dim(m: *const LfModel, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(m, "model")?.0.latent_dim();
        Ok(())
    })
}

/// Writes `{P, E, I, R}` to `out_sizes`.
///
/// # Safety
/// `m` must be a live handle; `out_sizes` must hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn lf_model_axis_sizes(m: *const LfModel, out_sizes: *mut usize) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        if out_sizes.is_null() {
            return Err(FfiError::Null("out_sizes"));
        }
        std::slice::from_raw_parts_mut(out_sizes, 4).copy_from_slice(&m.0.axis_sizes());
        Ok(())
    })
}

/// Reconstructs the latent of in-sample cell `{p, e, i, r}`.
///
/// # Safety
/// `cell` must hold 4 values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lf_model_reconstruct_cell(
    m: *const LfModel,
    cell: *const usize,
    out: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let w = m.0.reconstruct_cell(in_dims(cell, "cell")?)?;
        write_out(w.as_slice(), out, out_len, "reconstruction")
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_model_free(m: *mut LfModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ---------------------------------------------------------------------------
// Recovery

impl From<&RecoveryConfig> for LfRecoveryConfig {
    fn from(c: &RecoveryConfig) -> Self {
        Self {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            max_iters: c.max_iters,
            learning_rate: c.learning_rate,
            tolerance: c.tolerance,
            closed_form_max_params: c.closed_form_max_params,
        }
    }
}

impl From<&LfRecoveryConfig> for RecoveryConfig {
    fn from(c: &LfRecoveryConfig) -> Self {
        RecoveryConfig {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            max_iters: c.max_iters,
            learning_rate: c.learning_rate,
            tolerance: c.tolerance,
            closed_form_max_params: c.closed_form_max_params,
        }
    }
}

/// Fills `out` with the default recovery settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_recovery_config_default(out: *mut LfRecoveryConfig) -> LfStatus {
    guard(|| {
        *out_ref(out, "out")? = (&RecoveryConfig::default()).into();
        Ok(())
    })
}

/// Recovers model parameters for latent `w`. `config` may be NULL for the
/// defaults. When `reconstruction` is not NULL the reconstructed latent is
/// written there.
///
/// # Safety
/// `w` must hold `w_len` values, `reconstruction` (if not NULL)
/// `reconstruction_len` values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_recover(
    m: *const LfModel,
    w: *const f64,
    w_len: usize,
    form: LfParamForm,
    config: *const LfRecoveryConfig,
    reconstruction: *mut f64,
    reconstruction_len: usize,
    out: *mut LfRecoveryResult,
) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let out = out_ref(out, "out")?;
        let cfg: RecoveryConfig = match config.as_ref() {
            Some(c) => c.into(),
            None => RecoveryConfig::default(),
        };
        let w = DVector::from_column_slice(in_slice(w, w_len, "w")?);
        let form = match form {
            LfParamForm::RankOne => ParamForm::RankOne,
            LfParamForm::FullRank => ParamForm::FullRank,
        };
        let r = Recoverer::new(&m.0, &cfg)?.recover(&w, form, &cfg)?;
        if !reconstruction.is_null() {
            let recon = reconstruct(&m.0, &r.params)?;
            write_out(
                recon.as_slice(),
                reconstruction,
                reconstruction_len,
                "reconstruction",
            )?;
        }
        *out = LfRecoveryResult {
            final_loss: r.final_loss,
            objective: r.objective,
            iterations_used: r.iterations_used,
            converged: r.converged,
        };
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Directions

fn directions_of(m: &TensorModel) -> FfiResult<Vec<SemanticDirection>> {
    let tm = m.truncate_intensity()?;
    Ok(all_directions(&tm, m)?)
}

/// Number of directions a model yields: one per expression, plus yaw when
/// the model has two rotations.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_model_direction_count(m: *const LfModel, out: *mut usize) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let out = out_ref(out, "out")?;
        *out = directions_of(&m.0)?.len();
        Ok(())
    })
}

/// Extracts direction `index` (expressions in label order, then yaw).
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_model_direction(
    m: *const LfModel,
    index: usize,
    out: *mut *mut LfDirection,
) -> LfStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let out = out_ref(out, "out")?;
        let mut dirs = directions_of(&m.0)?;
        if index >= dirs.len() {
            return Err(latentfactor::Error::IndexOutOfRange {
                index,
                len: dirs.len(),
            }
            .into());
        }
        into_handle(LfDirection::new(dirs.swap_remove(index)), out);
        Ok(())
    })
}

/// Reads a direction container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_read(
    path: *const c_char,
    out: *mut *mut LfDirection,
) -> LfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let d = read_direction(&path_arg(path)?)?;
        into_handle(LfDirection::new(d), out);
        Ok(())
    })
}

/// Writes a direction container at full precision.
///
/// # Safety
/// `d` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_write(
    d: *const LfDirection,
    path: *const c_char,
) -> LfStatus {
    guard(|| {
        let d = deref(d, "direction")?;
        write_container(&Record::Direction(d.inner.clone()), &path_arg(path)?)?;
        Ok(())
    })
}

/// The direction's name, owned by the handle. NULL for a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_name(d: *const LfDirection) -> *const c_char {
    d.as_ref().map_or(std::ptr::null(), |d| d.name.as_ptr())
}

/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_kind(
    d: *const LfDirection,
    out: *mut LfDirectionKind,
) -> LfStatus {
    guard(|| {
        let d = deref(d, "direction")?;
        *out_ref(out, "out")? = match d.inner.kind() {
            DirectionKind::Expression => LfDirectionKind::Expression,
            DirectionKind::Rotation => LfDirectionKind::Rotation,
        };
        Ok(())
    })
}

/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_dim(d: *const LfDirection, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(d, "direction")?.inner.dim();
        Ok(())
    })
}

/// Copies the direction vector into `out`.
///
/// # Safety
/// `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_vector(
    d: *const LfDirection,
    out: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let d = deref(d, "direction")?;
        write_out(d.inner.vector().as_slice(), out, out_len, "direction")
    })
}

/// Writes `w + strength·n` to `out`. `out` may alias `w`.
///
/// # Safety
/// `w` must hold `w_len` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lf_edit(
    d: *const LfDirection,
    w: *const f64,
    w_len: usize,
    strength: f64,
    out: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let d = deref(d, "direction")?;
        let w = DVector::from_column_slice(in_slice(w, w_len, "w")?);
        let edited = apply_edit(&EditRequest {
            latent: &w,
            direction: &d.inner,
            strength,
        })?;
        write_out(edited.as_slice(), out, out_len, "edited latent")
    })
}

/// Releases a direction. NULL is ignored.
///
/// # Safety
/// `d` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_direction_free(d: *mut LfDirection) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}
