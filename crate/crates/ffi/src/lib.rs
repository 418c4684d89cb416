//! C ABI over the tracker.
//!
//! A tracker is an opaque handle created by `t3d_tracker_new` and released
//! with `t3d_tracker_free`. Detections go in and labels come out as JSON
//! text using the same record schema as the detection and track files.
//! Every fallible call returns a `T3dStatus`; on failure a message for the
//! calling thread is available from `t3d_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tracklet3d::association::{solve_assignment, CostMatrix};
use tracklet3d::io::{DetectionRecord, TrackOutputRecord};
use tracklet3d::{BetaConfig, Error, TrackerSession};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    OutOfOrderFrame = 4,
    Parse = 5,
    Invariant = 6,
    Panic = 7,
}

/// Tracking state of one video.
pub struct T3dTracker {
    session: TrackerSession,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> T3dStatus {
    match e {
        Error::OutOfOrderFrame { .. } => T3dStatus::OutOfOrderFrame,
        Error::Parse { .. } | Error::Json(_) => T3dStatus::Parse,
        Error::Invariant(_) => T3dStatus::Invariant,
        _ => T3dStatus::InvalidInput,
    }
}

/// Runs `f`, records any error for the calling thread and converts panics.
fn guard(f: impl FnOnce() -> Result<(), (T3dStatus, String)>) -> T3dStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => T3dStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside tracklet3d");
            T3dStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (T3dStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (T3dStatus, String) {
    (T3dStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (T3dStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (T3dStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, (T3dStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (T3dStatus::Invariant, "output contains a NUL byte".to_string()))
}

/// Creates a tracker. `config_json` holds a configuration object and may be
/// null for defaults. On success `*out` owns the new handle.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn t3d_tracker_new(config_json: *const c_char, out: *mut *mut T3dTracker) -> T3dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = if config_json.is_null() {
            BetaConfig::default()
        } else {
            let text = read_str(config_json, "config_json")?;
            serde_json::from_str(text).map_err(|e| (T3dStatus::Parse, e.to_string()))?
        };
        let session = TrackerSession::new(cfg).map_err(core_err)?;
        *out = Box::into_raw(Box::new(T3dTracker { session }));
        Ok(())
    })
}

/// Releases a tracker. Null is ignored.
///
/// # Safety
/// `tracker` must come from `t3d_tracker_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn t3d_tracker_free(tracker: *mut T3dTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Marks `frame` as the first frame of a new shot.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn t3d_tracker_add_shot_boundary(tracker: *mut T3dTracker, frame: u64) -> T3dStatus {
    guard(|| {
        let t = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        t.session.add_shot_boundary(frame);
        Ok(())
    })
}

/// Processes one frame. `detections_json` is a JSON array of detection
/// records, all with `frame` equal to `frame`. On success `*out_json` holds
/// a JSON array of track output records, one per detection, to be released
/// with `t3d_string_free`.
///
/// # Safety
/// `tracker` must be a live handle, `detections_json` a NUL-terminated
/// string and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn t3d_tracker_step(
    tracker: *mut T3dTracker,
    frame: u64,
    detections_json: *const c_char,
    out_json: *mut *mut c_char,
) -> T3dStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let t = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        let text = read_str(detections_json, "detections_json")?;
        let records: Vec<DetectionRecord> =
            serde_json::from_str(text).map_err(|e| (T3dStatus::Parse, e.to_string()))?;
        let detections = records
            .into_iter()
            .map(|r| r.into_detection(Path::new("")))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let (labels, _) = t.session.step(frame, &detections).map_err(core_err)?;
        let rows: Vec<TrackOutputRecord> = labels.iter().map(TrackOutputRecord::from).collect();
        let json = serde_json::to_string(&rows).map_err(|e| (T3dStatus::Invariant, e.to_string()))?;
        *out_json = to_c_string(json)?;
        Ok(())
    })
}

/// Number of live tracks.
///
/// # Safety
/// `tracker` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn t3d_tracker_num_tracks(tracker: *const T3dTracker, out: *mut usize) -> T3dStatus {
    guard(|| {
        let t = tracker.as_ref().ok_or_else(|| null("tracker"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = t.session.tracklets().len();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn t3d_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn t3d_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn t3d_status_name(status: T3dStatus) -> *const c_char {
    let s: &'static CStr = match status {
        T3dStatus::Ok => c"ok",
        T3dStatus::NullPointer => c"null pointer",
        T3dStatus::InvalidUtf8 => c"invalid utf-8",
        T3dStatus::InvalidInput => c"invalid input",
        T3dStatus::OutOfOrderFrame => c"out of order frame",
        T3dStatus::Parse => c"parse error",
        T3dStatus::Invariant => c"internal invariant violated",
        T3dStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Nearness `-ln z` of a positive depth.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn t3d_to_nearness(z: f64, out: *mut f64) -> T3dStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = tracklet3d::location::to_nearness(z).map_err(core_err)?;
        Ok(())
    })
}

/// Thresholded assignment on a row-major `rows x cols` cost matrix. Writes
/// the matched column of each row to `row_to_col`, or -1 when the row stays
/// unmatched.
///
/// # Safety
/// `costs` must point to `rows * cols` doubles and `row_to_col` to `rows`
/// writable integers; either may be null when the product is zero.
#[no_mangle]
pub unsafe extern "C" fn t3d_solve_assignment(
    costs: *const f64,
    rows: usize,
    cols: usize,
    beta_th: f64,
    row_to_col: *mut i64,
) -> T3dStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| (T3dStatus::InvalidInput, "matrix too large".to_string()))?;
        let values = if len == 0 {
            Vec::new()
        } else if costs.is_null() {
            return Err(null("costs"));
        } else {
            std::slice::from_raw_parts(costs, len).to_vec()
        };
        if rows > 0 && row_to_col.is_null() {
            return Err(null("row_to_col"));
        }
        if !(beta_th.is_finite()) {
            return Err((T3dStatus::InvalidInput, format!("beta_th must be finite, got {beta_th}")));
        }
        let a = solve_assignment(&CostMatrix::new(values, rows, cols, false), beta_th);
        if rows > 0 {
            let out = std::slice::from_raw_parts_mut(row_to_col, rows);
            out.fill(-1);
            for (r, c) in a.matches {
                out[r] = c as i64;
            }
        }
        Ok(())
    })
}
