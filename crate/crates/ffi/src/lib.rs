//! C ABI over the topicret engine.
//!
//! Every fallible function returns a [`TrStatus`]; on failure the message is
//! available from [`tr_last_error`] on the same thread until the next call.
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use topicret::cli::Engine;
use topicret::config::RunConfig;
use topicret::encoder::{Embedding, Granularity, Representation};
use topicret::index::RepresentationIndex;
use topicret::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    IncompatibleArtifacts = 5,
    Shape = 6,
    InvalidK = 7,
    InvalidSpace = 8,
    Config = 9,
    EmptyText = 10,
    Runtime = 11,
    Panic = 12,
}

impl From<&Error> for TrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => TrStatus::Io,
            Error::Format(_) | Error::Parse { .. } => TrStatus::Format,
            Error::IncompatibleArtifacts(_) => TrStatus::IncompatibleArtifacts,
            Error::Shape(_) => TrStatus::Shape,
            Error::InvalidK(_) => TrStatus::InvalidK,
            Error::InvalidSpace(_) => TrStatus::InvalidSpace,
            Error::Config(_) => TrStatus::Config,
            Error::EmptyText => TrStatus::EmptyText,
            _ => TrStatus::Runtime,
        }
    }
}

/// Byte accounting of an index file.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrSpaceStats {
    pub payload_bytes: u64,
    pub metadata_bytes: u64,
    pub total_bytes: u64,
    pub embeddings_stored: u64,
    pub docs: u64,
    pub total_gib: f64,
}

/// Opaque loaded artifact chain.
pub struct TrEngine {
    inner: Engine,
}

/// Opaque ranked list returned by [`tr_engine_search`].
pub struct TrResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (TrStatus, String)>) -> TrStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (TrStatus, String) {
    (TrStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (TrStatus, String) {
    (TrStatus::NullArgument, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (TrStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TrStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn flat_rep(data: &[f32], n: usize, dim: usize) -> Representation {
    Representation {
        text_id: String::new(),
        granularity: Granularity::Word,
        dim,
        entries: data
            .chunks_exact(dim)
            .take(n)
            .map(|v| Embedding {
                topic: None,
                vector: v.to_vec(),
                degenerate: false,
            })
            .collect(),
    }
}

/// MaxSim between `nq` query and `nd` document vectors, each `dim` floats, row-major.
///
/// # Safety
/// `query` must point to `nq * dim` floats and `doc` to `nd * dim` floats.
#[no_mangle]
pub unsafe extern "C" fn tr_maxsim(
    query: *const f32,
    nq: usize,
    doc: *const f32,
    nd: usize,
    dim: usize,
    out: *mut f64,
) -> TrStatus {
    guard(|| {
        if query.is_null() || doc.is_null() || out.is_null() {
            return Err(null("query/doc/out"));
        }
        if dim == 0 {
            return Err((TrStatus::Shape, "dim must be positive".into()));
        }
        let q = std::slice::from_raw_parts(query, nq * dim);
        let d = std::slice::from_raw_parts(doc, nd * dim);
        let s = topicret::retrieval::maxsim(&flat_rep(q, nq, dim), &flat_rep(d, nd, dim)).map_err(lib_err)?;
        *out = s;
        Ok(())
    })
}

/// MRR per GiB of index space.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn tr_tradeoff(mrr: f64, space_gib: f64, out: *mut f64) -> TrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = topicret::retrieval::tradeoff(mrr, space_gib).map_err(lib_err)?;
        Ok(())
    })
}

/// Loads an index file and reports its space usage.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tr_index_space(path: *const c_char, out: *mut TrSpaceStats) -> TrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = RepresentationIndex::load(&PathBuf::from(path)).map_err(lib_err)?.space_report();
        *out = TrSpaceStats {
            payload_bytes: s.payload_bytes,
            metadata_bytes: s.metadata_bytes,
            total_bytes: s.total_bytes,
            embeddings_stored: s.embeddings_stored,
            docs: s.docs,
            total_gib: s.total_gib(),
        };
        Ok(())
    })
}

/// Opens the artifact chain described by a config file. `config_path` may be
/// null for defaults; a non-null `artifacts_dir` overrides the configured one.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tr_engine_open(
    config_path: *const c_char,
    artifacts_dir: *const c_char,
    out: *mut *mut TrEngine,
) -> TrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut cfg = if config_path.is_null() {
            RunConfig::default()
        } else {
            RunConfig::load(&PathBuf::from(str_arg(config_path, "config_path")?)).map_err(lib_err)?
        };
        if !artifacts_dir.is_null() {
            cfg.artifacts = PathBuf::from(str_arg(artifacts_dir, "artifacts_dir")?);
        }
        cfg.validate().map_err(lib_err)?;
        let inner = Engine::open(&cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TrEngine { inner }));
        Ok(())
    })
}

/// Ranks the indexed documents for `query_text`, keeping the best `k`.
///
/// # Safety
/// `engine` must come from [`tr_engine_open`]; `query_text` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tr_engine_search(
    engine: *const TrEngine,
    query_text: *const c_char,
    k: usize,
    out: *mut *mut TrResults,
) -> TrStatus {
    guard(|| {
        if engine.is_null() || out.is_null() {
            return Err(null("engine/out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(query_text, "query_text")?;
        let ranked = (*engine).inner.search("query", text, k).map_err(lib_err)?;
        let mut results = TrResults {
            ids: Vec::with_capacity(ranked.hits.len()),
            scores: Vec::with_capacity(ranked.hits.len()),
        };
        for (id, score) in ranked.hits {
            results.ids.push(CString::new(id).map_err(|_| (TrStatus::Format, "doc id contains NUL".into()))?);
            results.scores.push(score);
        }
        *out = Box::into_raw(Box::new(results));
        Ok(())
    })
}

/// Number of documents in the index behind `engine`, 0 for null.
///
/// # Safety
/// `engine` must be null or come from [`tr_engine_open`].
#[no_mangle]
pub unsafe extern "C" fn tr_engine_num_docs(engine: *const TrEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.inner.index.len())
}

/// # Safety
/// `engine` must be null or come from [`tr_engine_open`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tr_engine_free(engine: *mut TrEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// # Safety
/// `results` must be null or come from [`tr_engine_search`].
#[no_mangle]
pub unsafe extern "C" fn tr_results_len(results: *const TrResults) -> usize {
    results.as_ref().map_or(0, |r| r.ids.len())
}

/// Document id at `rank` (0-based), or null when out of range. Owned by `results`.
///
/// # Safety
/// `results` must be null or come from [`tr_engine_search`].
#[no_mangle]
pub unsafe extern "C" fn tr_results_doc_id(results: *const TrResults, rank: usize) -> *const c_char {
    results
        .as_ref()
        .and_then(|r| r.ids.get(rank))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Score at `rank` (0-based), NaN when out of range.
///
/// # Safety
/// `results` must be null or come from [`tr_engine_search`].
#[no_mangle]
pub unsafe extern "C" fn tr_results_score(results: *const TrResults, rank: usize) -> f64 {
    results
        .as_ref()
        .and_then(|r| r.scores.get(rank).copied())
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `results` must be null or come from [`tr_engine_search`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tr_results_free(results: *mut TrResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
