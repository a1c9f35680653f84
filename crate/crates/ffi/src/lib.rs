//! C ABI for the msled texture retrieval library.
//!
//! Every function returns an `MsledStatus`; on failure a description is
//! available from `msled_last_error` on the same thread. Objects are opaque
//! handles owned by the caller and released with their `_free` function.
//! Functions that produce a handle set it to null when they fail.
//! Panics never cross the boundary and are reported as `MSLED_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use msled::retrieval::Labeling;
use msled::{Error, MultiscaleDescriptor, PipelineConfig};

/// Maximum number of scales an `MsledConfig` can carry.
pub const MSLED_MAX_SCALES: usize = 8;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsledStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Decode = 4,
    Degenerate = 5,
    Numerical = 6,
    Dataset = 7,
    KOutOfRange = 8,
    UnknownId = 9,
    Format = 10,
    VersionMismatch = 11,
    Truncated = 12,
    ChecksumMismatch = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

/// Pipeline parameters. Obtain defaults from `msled_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsledConfig {
    pub window: u32,
    pub block_size: u32,
    pub overlap: f64,
    pub n_scales: u32,
    pub scales: [f64; MSLED_MAX_SCALES],
    pub epsilon_scale: f64,
    /// Nonzero to require extrema to strictly dominate their window.
    pub strict_extrema: u8,
}

/// Multiscale covariance descriptor of one image.
pub struct MsledDescriptor(MultiscaleDescriptor);

/// Loaded descriptor index.
pub struct MsledIndex(msled::DescriptorIndex);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MsledStatus {
    match err {
        Error::Decode { .. } => MsledStatus::Decode,
        Error::InvalidScale { .. } | Error::InvalidParameter(_) => MsledStatus::InvalidArgument,
        Error::Degenerate(_) => MsledStatus::Degenerate,
        Error::DimensionMismatch { .. } | Error::NotPositiveDefinite | Error::IncompatibleDescriptors(_) => {
            MsledStatus::Numerical
        }
        Error::Dataset(_) => MsledStatus::Dataset,
        Error::ImageFailed { source, .. } => status_of(source),
        Error::KOutOfRange { .. } => MsledStatus::KOutOfRange,
        Error::UnknownId(_) => MsledStatus::UnknownId,
        Error::Io(_) => MsledStatus::Io,
        Error::Format(_) => MsledStatus::Format,
        Error::VersionMismatch { .. } => MsledStatus::VersionMismatch,
        Error::Truncated => MsledStatus::Truncated,
        Error::ChecksumMismatch { .. } => MsledStatus::ChecksumMismatch,
    }
}

struct Failure(MsledStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: MsledStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsledStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MsledStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            MsledStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(MsledStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MsledStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(MsledStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(MsledStatus::NullPointer, format!("{what} is null")))
}

fn to_pipeline(c: &MsledConfig) -> Result<PipelineConfig, Failure> {
    let n = c.n_scales as usize;
    if n == 0 || n > MSLED_MAX_SCALES {
        return Err(fail(
            MsledStatus::InvalidArgument,
            format!("n_scales must be in 1..={MSLED_MAX_SCALES}, got {n}"),
        ));
    }
    let cfg = PipelineConfig {
        window: c.window as usize,
        block_size: c.block_size as usize,
        overlap: c.overlap,
        scales: c.scales[..n].to_vec(),
        epsilon_scale: c.epsilon_scale,
        strict_extrema: c.strict_extrema != 0,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msled_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on the calling thread, or an empty
/// string. Valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn msled_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The default pipeline parameters.
#[no_mangle]
pub extern "C" fn msled_config_default() -> MsledConfig {
    let d = PipelineConfig::default();
    let mut scales = [0.0; MSLED_MAX_SCALES];
    scales[..d.scales.len()].copy_from_slice(&d.scales);
    MsledConfig {
        window: d.window as u32,
        block_size: d.block_size as u32,
        overlap: d.overlap,
        n_scales: d.scales.len() as u32,
        scales,
        epsilon_scale: d.epsilon_scale,
        strict_extrema: u8::from(d.strict_extrema),
    }
}

/// Computes the descriptor of a PPM or PNG image. `config` may be null for
/// the defaults.
///
/// # Safety
/// `path` must be a NUL-terminated string, `config` null or valid and
/// `out_descriptor` writable.
#[no_mangle]
pub unsafe extern "C" fn msled_descriptor_from_image(
    path: *const c_char,
    config: *const MsledConfig,
    out_descriptor: *mut *mut MsledDescriptor,
) -> MsledStatus {
    guard(|| {
        let slot = out(out_descriptor, "out_descriptor")?;
        *slot = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let cfg = match config.as_ref() {
            Some(c) => to_pipeline(c)?,
            None => PipelineConfig::default(),
        };
        let img = msled::load_image(&path)?;
        let d = msled::compute_descriptor(&img, &cfg)?;
        *slot = Box::into_raw(Box::new(MsledDescriptor(d)));
        Ok(())
    })
}

/// Multiscale Riemannian distance between two descriptors.
///
/// # Safety
/// Handles must come from this library; `out_distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msled_descriptor_distance(
    a: *const MsledDescriptor,
    b: *const MsledDescriptor,
    out_distance: *mut f64,
) -> MsledStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(out_distance, "out_distance")? = msled::multiscale_distance(&a.0, &b.0)?;
        Ok(())
    })
}

/// # Safety
/// `descriptor` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn msled_descriptor_free(descriptor: *mut MsledDescriptor) {
    if !descriptor.is_null() {
        drop(Box::from_raw(descriptor));
    }
}

/// Loads an index file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_index` writable.
#[no_mangle]
pub unsafe extern "C" fn msled_index_load(path: *const c_char, out_index: *mut *mut MsledIndex) -> MsledStatus {
    guard(|| {
        let slot = out(out_index, "out_index")?;
        *slot = ptr::null_mut();
        let index = msled::load_index(path_arg(path, "path")?)?;
        *slot = Box::into_raw(Box::new(MsledIndex(index)));
        Ok(())
    })
}

/// Scans `dataset_dir` and builds an index. `labeling` is 0 for the parent
/// directory name and 1 for the file stem; `config` may be null.
///
/// # Safety
/// `dataset_dir` must be a NUL-terminated string, `config` null or valid,
/// `out_index` writable.
#[no_mangle]
pub unsafe extern "C" fn msled_index_build(
    dataset_dir: *const c_char,
    labeling: u32,
    config: *const MsledConfig,
    out_index: *mut *mut MsledIndex,
) -> MsledStatus {
    guard(|| {
        let slot = out(out_index, "out_index")?;
        *slot = ptr::null_mut();
        let dir = path_arg(dataset_dir, "dataset_dir")?;
        let labeling = match labeling {
            0 => Labeling::Subdir,
            1 => Labeling::Stem,
            other => return Err(fail(MsledStatus::InvalidArgument, format!("unknown labeling {other}"))),
        };
        let cfg = match config.as_ref() {
            Some(c) => to_pipeline(c)?,
            None => PipelineConfig::default(),
        };
        let manifest = msled::scan_dataset(dir, labeling)?;
        let index = msled::build_index(&manifest, &cfg)?;
        *slot = Box::into_raw(Box::new(MsledIndex(index)));
        Ok(())
    })
}

/// Writes an index file.
///
/// # Safety
/// `index` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn msled_index_save(index: *const MsledIndex, path: *const c_char) -> MsledStatus {
    guard(|| {
        let index = deref(index, "index")?;
        msled::save_index(&index.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msled_index_len(index: *const MsledIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.len())
}

/// The `k` entries closest to `probe`, ascending by distance with ties broken
/// by id. `out_ids` and `out_distances` must each hold `k` values; either may
/// be null when not wanted.
///
/// # Safety
/// Handles must be live; non-null buffers must hold `k` elements.
#[no_mangle]
pub unsafe extern "C" fn msled_index_query(
    index: *const MsledIndex,
    probe: *const MsledDescriptor,
    k: usize,
    out_ids: *mut u64,
    out_distances: *mut f64,
) -> MsledStatus {
    guard(|| {
        let (index, probe) = (deref(index, "index")?, deref(probe, "probe")?);
        let result = msled::query(&index.0, &probe.0, k)?;
        for (i, hit) in result.hits.iter().enumerate() {
            if !out_ids.is_null() {
                *out_ids.add(i) = hit.id;
            }
            if !out_distances.is_null() {
                *out_distances.add(i) = hit.distance;
            }
        }
        Ok(())
    })
}

/// Average retrieval rate of the index at `k`.
///
/// # Safety
/// `index` must be live and `out_arr` writable.
#[no_mangle]
pub unsafe extern "C" fn msled_index_evaluate_arr(index: *const MsledIndex, k: usize, out_arr: *mut f64) -> MsledStatus {
    guard(|| {
        let index = deref(index, "index")?;
        let slot = out(out_arr, "out_arr")?;
        *slot = msled::evaluate_arr(&index.0, k)?.arr;
        Ok(())
    })
}

/// Copies the class label of entry `id` into `buf` as a NUL-terminated
/// string. `out_len` (optional) receives the label length without the NUL;
/// `MSLED_STATUS_BUFFER_TOO_SMALL` is returned when `buf_len` is not enough.
///
/// # Safety
/// `index` must be live and `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn msled_index_label(
    index: *const MsledIndex,
    id: u64,
    buf: *mut c_char,
    buf_len: usize,
    out_len: *mut usize,
) -> MsledStatus {
    guard(|| {
        let index = deref(index, "index")?;
        let entry = index.0.get(id).ok_or(Error::UnknownId(id))?;
        let bytes = entry.label.as_bytes();
        if let Some(n) = out_len.as_mut() {
            *n = bytes.len();
        }
        if buf.is_null() || buf_len <= bytes.len() {
            return Err(fail(
                MsledStatus::BufferTooSmall,
                format!("label needs {} bytes", bytes.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `index` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn msled_index_free(index: *mut MsledIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}
