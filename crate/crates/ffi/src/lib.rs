//! C ABI over `pas-core`.
//!
//! Every function returns a [`PasStatus`]; on failure a message is available
//! from [`pas_last_error_message`] on the same thread. Datasets are opaque
//! handles released with [`pas_dataset_free`]; strings returned by the library
//! are released with [`pas_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use pas_core::corpus::{Dataset, LoadMode};
use pas_core::eval::query_rng;
use pas_core::geo::{bearing_deg, haversine_m, DirectionBin, DistanceBins, GeoPoint};
use pas_core::mechanism::{make_token, PasToken as CoreToken, PrivacyParams, TokenMeta};
use pas_core::region::ale;
use pas_core::retrieval::{RetrievalConfig, Retriever};
use pas_core::semantics::LexicalEmbedder;

/// Capacity of [`PasToken::anchor_id`], including the terminating NUL.
pub const PAS_ANCHOR_ID_CAP: usize = 32;
pub const PAS_MODE_BASELINE: i32 = 0;
pub const PAS_MODE_PAS: i32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    NotFound = 4,
    Runtime = 5,
    Panic = 6,
}

/// A released location token. `direction` is 0 = N, 1 = NE, ... 7 = NW.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PasToken {
    pub anchor_id: [c_char; PAS_ANCHOR_ID_CAP],
    pub direction: u8,
    pub dist_bin: u32,
    pub epsilon: f64,
    pub scale_m: f64,
}

/// A loaded dataset with default distance bins, the lexical embedder and
/// default retrieval settings.
pub struct PasDataset {
    retriever: Retriever,
}

struct Failure {
    status: PasStatus,
    message: String,
}

impl Failure {
    fn new(status: PasStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::new(PasStatus::InvalidArgument, e.to_string())
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PasStatus::Ok
        }
        Ok(Err(f)) => {
            set_error(&f.message);
            f.status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            PasStatus::Panic
        }
    }
}

fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either NULL or a valid, writable pointer.
    unsafe { p.as_mut() }
        .ok_or_else(|| Failure::new(PasStatus::NullPointer, format!("{name} is NULL")))
}

fn dataset_ref<'a>(ds: *const PasDataset) -> Result<&'a PasDataset, Failure> {
    // SAFETY: non-NULL handles come from pas_dataset_load and are not yet freed.
    unsafe { ds.as_ref() }
        .ok_or_else(|| Failure::new(PasStatus::NullPointer, "dataset handle is NULL"))
}

fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::new(
            PasStatus::NullPointer,
            format!("{name} is NULL"),
        ));
    }
    // SAFETY: non-NULL pointers are NUL-terminated strings owned by the caller.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

fn point(lat: f64, lon: f64) -> Result<GeoPoint, Failure> {
    GeoPoint::new(lat, lon).map_err(invalid)
}

fn to_c_token(t: &CoreToken) -> Result<PasToken, Failure> {
    let bytes = t.anchor_id.as_bytes();
    if bytes.len() >= PAS_ANCHOR_ID_CAP {
        return Err(invalid(format!(
            "anchor id {:?} exceeds {} bytes",
            t.anchor_id,
            PAS_ANCHOR_ID_CAP - 1
        )));
    }
    let mut anchor_id = [0 as c_char; PAS_ANCHOR_ID_CAP];
    for (dst, &b) in anchor_id.iter_mut().zip(bytes) {
        *dst = b as c_char;
    }
    Ok(PasToken {
        anchor_id,
        direction: t.dir.index() as u8,
        dist_bin: t.dist_bin as u32,
        epsilon: t.params.epsilon,
        scale_m: t.params.scale_m,
    })
}

fn from_c_token(t: &PasToken) -> Result<CoreToken, Failure> {
    let len = t
        .anchor_id
        .iter()
        .position(|&c| c == 0)
        .ok_or_else(|| invalid("anchor_id is not NUL-terminated"))?;
    let bytes: Vec<u8> = t.anchor_id[..len].iter().map(|&c| c as u8).collect();
    let anchor_id =
        String::from_utf8(bytes).map_err(|_| invalid("anchor_id is not valid UTF-8"))?;
    Ok(CoreToken {
        anchor_id,
        dir: DirectionBin::from_index(t.direction as usize).map_err(invalid)?,
        dist_bin: t.dist_bin as usize,
        params: PrivacyParams::new(t.epsilon, t.scale_m).map_err(invalid)?,
        seed_tag: TokenMeta::default(),
    })
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn pas_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads `anchors.jsonl`, `chunks.jsonl` and `queries.jsonl` from `dir`.
///
/// # Safety
/// `dir` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_dataset_load(
    dir: *const c_char,
    out: *mut *mut PasDataset,
) -> PasStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let dir = str_arg(dir, "dir")?;
        let bins = DistanceBins::default();
        let ds = Dataset::load(Path::new(dir), LoadMode::Lenient).map_err(|e| match e {
            pas_core::corpus::CorpusError::Io { .. } => Failure::new(PasStatus::Io, e.to_string()),
            other => invalid(other),
        })?;
        ds.validate(Some(&bins)).map_err(invalid)?;
        let retriever = Retriever::new(
            Arc::new(ds),
            Arc::new(LexicalEmbedder::default()),
            bins,
            RetrievalConfig::default(),
        )
        .map_err(|e| Failure::new(PasStatus::Runtime, e.to_string()))?;
        *out = Box::into_raw(Box::new(PasDataset { retriever }));
        Ok(())
    })
}

/// Releases a handle from [`pas_dataset_load`]. NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn pas_dataset_free(ds: *mut PasDataset) {
    if !ds.is_null() {
        // SAFETY: see the function contract.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// # Safety
/// `ds` must be a live handle; output pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_dataset_counts(
    ds: *const PasDataset,
    anchors: *mut usize,
    chunks: *mut usize,
    queries: *mut usize,
) -> PasStatus {
    guard(|| {
        let d = dataset_ref(ds)?.retriever.dataset();
        *out_ref(anchors, "anchors")? = d.anchors.len();
        *out_ref(chunks, "chunks")? = d.chunks.len();
        *out_ref(queries, "queries")? = d.queries.len();
        Ok(())
    })
}

/// Great-circle distance in meters.
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_haversine_m(
    lat1: f64,
    lon1: f64,
    lat2: f64,
    lon2: f64,
    out: *mut f64,
) -> PasStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = haversine_m(point(lat1, lon1)?, point(lat2, lon2)?);
        Ok(())
    })
}

/// Initial bearing in degrees clockwise from north. Coincident points give 0
/// with `*degenerate` set.
///
/// # Safety
/// `out` and `degenerate` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_bearing_deg(
    lat1: f64,
    lon1: f64,
    lat2: f64,
    lon2: f64,
    out: *mut f64,
    degenerate: *mut bool,
) -> PasStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let degenerate = out_ref(degenerate, "degenerate")?;
        let b = bearing_deg(point(lat1, lon1)?, point(lat2, lon2)?);
        *out = b.degrees;
        *degenerate = b.degenerate;
        Ok(())
    })
}

/// Privatizes `(lat, lon)` against the dataset's anchors. Identical seeds
/// give identical tokens.
///
/// # Safety
/// `ds` must be a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_make_token(
    ds: *const PasDataset,
    lat: f64,
    lon: f64,
    epsilon: f64,
    scale_m: f64,
    seed: u64,
    out: *mut PasToken,
) -> PasStatus {
    guard(|| {
        let r = &dataset_ref(ds)?.retriever;
        let out = out_ref(out, "out")?;
        let params = PrivacyParams::new(epsilon, scale_m).map_err(invalid)?;
        let mut rng = query_rng(seed, 0);
        let t = make_token(
            point(lat, lon)?,
            &r.dataset().anchors,
            params,
            r.bins(),
            "ffi",
            &mut rng,
        )
        .map_err(|e| Failure::new(PasStatus::Runtime, e.to_string()))?;
        *out = to_c_token(&t)?;
        Ok(())
    })
}

/// Runs retrieval for a dataset query and writes the ranked result as JSON.
/// `mode` is [`PAS_MODE_BASELINE`] or [`PAS_MODE_PAS`]; `epsilon`, `scale_m`
/// and `seed` are ignored for the baseline. Matches `pas query` for the same
/// seed. Free `*out_json` with [`pas_string_free`].
///
/// # Safety
/// `ds` must be a live handle, `query_id` a NUL-terminated string and
/// `out_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_retrieve_json(
    ds: *const PasDataset,
    query_id: *const c_char,
    mode: i32,
    epsilon: f64,
    scale_m: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> PasStatus {
    guard(|| {
        let r = &dataset_ref(ds)?.retriever;
        let out = out_ref(out_json, "out_json")?;
        *out = ptr::null_mut();
        let id = str_arg(query_id, "query_id")?;
        let (qi, q) = r
            .dataset()
            .queries
            .iter()
            .enumerate()
            .find(|(_, q)| q.query_id == id)
            .ok_or_else(|| Failure::new(PasStatus::NotFound, format!("unknown query id {id}")))?;
        let runtime = |e: pas_core::retrieval::RetrievalError| {
            Failure::new(PasStatus::Runtime, e.to_string())
        };
        let result = match mode {
            PAS_MODE_BASELINE => r.retrieve_baseline(q).map_err(runtime)?,
            PAS_MODE_PAS => {
                let params = PrivacyParams::new(epsilon, scale_m).map_err(invalid)?;
                let mut rng = query_rng(seed, qi);
                r.retrieve_pas(q, params, &format!("seed={seed}"), &mut rng)
                    .map_err(runtime)?
                    .result
            }
            other => return Err(invalid(format!("unknown mode {other}"))),
        };
        let json = serde_json::to_string(&result)
            .map_err(|e| Failure::new(PasStatus::Runtime, e.to_string()))?;
        *out = CString::new(json).map_err(invalid)?.into_raw();
        Ok(())
    })
}

/// Localization error of a centroid observer with `samples` draws from the
/// token's region.
///
/// # Safety
/// `ds` must be a live handle, `token` readable and `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pas_ale(
    ds: *const PasDataset,
    lat: f64,
    lon: f64,
    token: *const PasToken,
    samples: u32,
    seed: u64,
    out: *mut f64,
) -> PasStatus {
    guard(|| {
        let r = &dataset_ref(ds)?.retriever;
        let out = out_ref(out, "out")?;
        // SAFETY: non-NULL token pointers are readable per the contract.
        let token = unsafe { token.as_ref() }
            .ok_or_else(|| Failure::new(PasStatus::NullPointer, "token is NULL"))?;
        let t = from_c_token(token)?;
        if r.dataset().anchor(&t.anchor_id).is_none() {
            return Err(Failure::new(
                PasStatus::NotFound,
                format!("unknown anchor {}", t.anchor_id),
            ));
        }
        let mut rng = query_rng(seed, 0);
        *out = ale(
            point(lat, lon)?,
            &t,
            &r.dataset().anchors,
            r.bins(),
            samples as usize,
            &mut rng,
        )
        .map_err(invalid)?;
        Ok(())
    })
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pas_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: see the function contract.
        drop(unsafe { CString::from_raw(s) });
    }
}
