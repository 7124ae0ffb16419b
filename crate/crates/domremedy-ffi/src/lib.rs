//! C ABI for the domremedy library.
//!
//! Conventions:
//! - handles (`DrDocument`, `DrManifest`) are opaque; free them with their
//!   `*_free` function exactly once;
//! - functions returning `DrStatus` report failures through the code and
//!   leave out-parameters untouched on error; `dr_last_error_message`
//!   returns a thread-local description of the most recent failure;
//! - returned `char*` strings are NUL-terminated UTF-8 owned by the caller;
//!   release them with `dr_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::ptr;

use domremedy::chunk::{
    plan_chunks, reassemble, verify_roundtrip, Chunk, ChunkIdGen, ChunkManifest, DefaultEstimator,
};
use domremedy::diff::diff_trees;
use domremedy::dom::{
    normalize_document, parse_html, serialize_document, to_canonical_json, tree_edit_distance,
    tree_equal, UnitCost,
};
use domremedy::metrics::spearman_rho;
use domremedy::DomDocument;

/// Status codes for fallible entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullArgument = 1,
    EmptyDocument = 2,
    InvalidBudget = 3,
    ResourceLimit = 4,
    DegenerateInput = 5,
    OutOfRange = 6,
    ReassemblyConflict = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").expect("static message"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn fail(status: DrStatus, message: impl Into<String>) -> DrStatus {
    set_error(message.into());
    status
}

/// A parsed document behind an opaque handle.
pub struct DrDocument {
    doc: DomDocument,
}

/// A chunk plan behind an opaque handle.
pub struct DrManifest {
    manifest: ChunkManifest,
}

fn own_string(s: String) -> *mut c_char {
    match CString::new(s.replace('\0', " ")) {
        Ok(c) => c.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Description of the most recent error on this thread, or NULL.
/// Free with `dr_string_free`.
#[no_mangle]
pub extern "C" fn dr_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => own_string(msg.to_string_lossy().into_owned()),
        None => ptr::null_mut(),
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn dr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by a `dr_*` function
/// documented to transfer string ownership, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse HTML bytes into a document handle. Malformed markup is repaired;
/// only an entirely empty input fails. The tree is settled to its
/// parse/serialize fixed point.
///
/// # Safety
/// `html` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dr_document_parse(
    html: *const u8,
    len: usize,
    out: *mut *mut DrDocument,
) -> DrStatus {
    if html.is_null() || out.is_null() {
        return fail(DrStatus::NullArgument, "html and out must be non-NULL");
    }
    let bytes = std::slice::from_raw_parts(html, len);
    match parse_html(bytes, None) {
        Ok(doc) => {
            let doc = normalize_document(doc);
            *out = Box::into_raw(Box::new(DrDocument { doc }));
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::EmptyDocument, e.to_string()),
    }
}

/// # Safety
/// `doc` must be NULL or an unfreed handle from `dr_document_parse`/
/// `dr_reassemble`.
#[no_mangle]
pub unsafe extern "C" fn dr_document_free(doc: *mut DrDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Serialize a document back to HTML. Free the result with `dr_string_free`.
///
/// # Safety
/// `doc` must be a valid unfreed document handle.
#[no_mangle]
pub unsafe extern "C" fn dr_document_serialize(doc: *const DrDocument) -> *mut c_char {
    let Some(doc) = doc.as_ref() else {
        return ptr::null_mut();
    };
    own_string(serialize_document(&doc.doc))
}

/// Canonical JSON encoding of the document tree. Free with `dr_string_free`.
///
/// # Safety
/// `doc` must be a valid unfreed document handle.
#[no_mangle]
pub unsafe extern "C" fn dr_document_to_json(doc: *const DrDocument) -> *mut c_char {
    let Some(doc) = doc.as_ref() else {
        return ptr::null_mut();
    };
    own_string(to_canonical_json(&doc.doc.root))
}

/// Total node count of the document tree; 0 for NULL.
///
/// # Safety
/// `doc` must be NULL or a valid unfreed document handle.
#[no_mangle]
pub unsafe extern "C" fn dr_document_node_count(doc: *const DrDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.doc.root.node_count())
}

/// Maximum root-to-leaf depth in edges; 0 for NULL.
///
/// # Safety
/// `doc` must be NULL or a valid unfreed document handle.
#[no_mangle]
pub unsafe extern "C" fn dr_document_max_depth(doc: *const DrDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.doc.root.max_depth())
}

/// Structural equality of two document trees.
///
/// # Safety
/// Both handles must be valid unfreed document handles.
#[no_mangle]
pub unsafe extern "C" fn dr_tree_equal(a: *const DrDocument, b: *const DrDocument) -> bool {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => tree_equal(&a.doc.root, &b.doc.root),
        _ => false,
    }
}

/// Unit-cost ordered tree edit distance between two documents.
///
/// # Safety
/// Both handles and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dr_tree_edit_distance(
    a: *const DrDocument,
    b: *const DrDocument,
    out: *mut u64,
) -> DrStatus {
    let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
        return fail(DrStatus::NullArgument, "both documents must be non-NULL");
    };
    if out.is_null() {
        return fail(DrStatus::NullArgument, "out must be non-NULL");
    }
    match tree_edit_distance(&a.doc.root, &b.doc.root, &UnitCost) {
        Ok(d) => {
            *out = d;
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::ResourceLimit, e.to_string()),
    }
}

/// Classified structural diff between two documents as change-set JSON.
/// Free with `dr_string_free`.
///
/// # Safety
/// Both handles must be valid unfreed document handles.
#[no_mangle]
pub unsafe extern "C" fn dr_diff_trees(
    original: *const DrDocument,
    modified: *const DrDocument,
) -> *mut c_char {
    let (Some(a), Some(b)) = (original.as_ref(), modified.as_ref()) else {
        return ptr::null_mut();
    };
    let cs = diff_trees(&a.doc.root, &b.doc.root);
    own_string(serde_json::to_string(&cs).unwrap_or_default())
}

/// Split a document into chunks of at most `budget` tokens (default
/// estimator), reserving `headroom` within the downstream output cap.
/// Chunk identifiers derive from `seed`, so plans are reproducible.
///
/// # Safety
/// `doc` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dr_plan_chunks(
    doc: *const DrDocument,
    budget: usize,
    headroom: usize,
    seed: u64,
    out: *mut *mut DrManifest,
) -> DrStatus {
    let Some(doc) = doc.as_ref() else {
        return fail(DrStatus::NullArgument, "doc must be non-NULL");
    };
    if out.is_null() {
        return fail(DrStatus::NullArgument, "out must be non-NULL");
    }
    let mut ids = ChunkIdGen::from_seed(seed);
    match plan_chunks(&doc.doc, &DefaultEstimator, budget, headroom, &mut ids) {
        Ok(manifest) => {
            *out = Box::into_raw(Box::new(DrManifest { manifest }));
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::InvalidBudget, e.to_string()),
    }
}

/// # Safety
/// `manifest` must be NULL or an unfreed handle from `dr_plan_chunks`.
#[no_mangle]
pub unsafe extern "C" fn dr_manifest_free(manifest: *mut DrManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// Number of chunks in the plan; 0 for NULL.
///
/// # Safety
/// `manifest` must be NULL or a valid unfreed manifest handle.
#[no_mangle]
pub unsafe extern "C" fn dr_manifest_chunk_count(manifest: *const DrManifest) -> usize {
    manifest.as_ref().map_or(0, |m| m.manifest.chunks.len())
}

/// Serialized HTML of the chunk at `index` (ordinal order), or NULL when out
/// of range. Free with `dr_string_free`.
///
/// # Safety
/// `manifest` must be a valid unfreed manifest handle.
#[no_mangle]
pub unsafe extern "C" fn dr_manifest_chunk_html(
    manifest: *const DrManifest,
    index: usize,
) -> *mut c_char {
    let Some(m) = manifest.as_ref() else {
        return ptr::null_mut();
    };
    match m.manifest.chunks.get(index) {
        Some(chunk) => own_string(chunk.html.clone()),
        None => ptr::null_mut(),
    }
}

/// Chunk identifier at `index`, or NULL. Free with `dr_string_free`.
///
/// # Safety
/// `manifest` must be a valid unfreed manifest handle.
#[no_mangle]
pub unsafe extern "C" fn dr_manifest_chunk_id(
    manifest: *const DrManifest,
    index: usize,
) -> *mut c_char {
    let Some(m) = manifest.as_ref() else {
        return ptr::null_mut();
    };
    match m.manifest.chunks.get(index) {
        Some(chunk) => own_string(chunk.chunk_id.as_str().to_owned()),
        None => ptr::null_mut(),
    }
}

/// Manifest as JSON (chunk metadata, anchors, preserved blobs; fragment
/// bodies excluded as in the on-disk format). Free with `dr_string_free`.
///
/// # Safety
/// `manifest` must be a valid unfreed manifest handle.
#[no_mangle]
pub unsafe extern "C" fn dr_manifest_to_json(manifest: *const DrManifest) -> *mut c_char {
    let Some(m) = manifest.as_ref() else {
        return ptr::null_mut();
    };
    own_string(serde_json::to_string(&m.manifest).unwrap_or_default())
}

/// Splice modified chunk HTML back into a document. `chunk_htmls` holds one
/// NUL-terminated string per chunk, in ordinal order.
///
/// # Safety
/// `manifest` must be valid; `chunk_htmls` must point to `count` valid
/// C strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dr_reassemble(
    manifest: *const DrManifest,
    chunk_htmls: *const *const c_char,
    count: usize,
    out: *mut *mut DrDocument,
) -> DrStatus {
    let Some(m) = manifest.as_ref() else {
        return fail(DrStatus::NullArgument, "manifest must be non-NULL");
    };
    if chunk_htmls.is_null() || out.is_null() {
        return fail(
            DrStatus::NullArgument,
            "chunk_htmls and out must be non-NULL",
        );
    }
    if count != m.manifest.chunks.len() {
        return fail(
            DrStatus::OutOfRange,
            format!(
                "expected {} chunk strings, got {count}",
                m.manifest.chunks.len()
            ),
        );
    }
    let provided = std::slice::from_raw_parts(chunk_htmls, count);
    let mut chunks: Vec<Chunk> = Vec::with_capacity(count);
    for (meta, &item) in m.manifest.chunks.iter().zip(provided) {
        if item.is_null() {
            return fail(DrStatus::NullArgument, "chunk string must be non-NULL");
        }
        let html = match std::ffi::CStr::from_ptr(item).to_str() {
            Ok(s) => s.to_owned(),
            Err(_) => return fail(DrStatus::DegenerateInput, "chunk string is not UTF-8"),
        };
        chunks.push(Chunk {
            html,
            ..meta.clone()
        });
    }
    match reassemble(&m.manifest, &chunks) {
        Ok(doc) => {
            *out = Box::into_raw(Box::new(DrDocument { doc }));
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::ReassemblyConflict, e.to_string()),
    }
}

/// Chunk the document, reassemble unmodified, and compare. `ok` is the
/// equality verdict; `ted` the tree edit distance when measurable (u64::MAX
/// when omitted).
///
/// # Safety
/// `doc`, `ok`, and `ted` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dr_verify_roundtrip(
    doc: *const DrDocument,
    budget: usize,
    headroom: usize,
    ok: *mut bool,
    ted: *mut u64,
) -> DrStatus {
    let Some(doc) = doc.as_ref() else {
        return fail(DrStatus::NullArgument, "doc must be non-NULL");
    };
    if ok.is_null() || ted.is_null() {
        return fail(DrStatus::NullArgument, "ok and ted must be non-NULL");
    }
    match verify_roundtrip(&doc.doc, &DefaultEstimator, budget, headroom) {
        Ok(report) => {
            *ok = report.ok;
            *ted = report.ted.unwrap_or(u64::MAX);
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::InvalidBudget, e.to_string()),
    }
}

/// Spearman rank correlation of two equal-length vectors.
///
/// # Safety
/// `xs` and `ys` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dr_spearman_rho(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut f64,
) -> DrStatus {
    if xs.is_null() || ys.is_null() || out.is_null() {
        return fail(DrStatus::NullArgument, "xs, ys, and out must be non-NULL");
    }
    let x = std::slice::from_raw_parts(xs, len);
    let y = std::slice::from_raw_parts(ys, len);
    match spearman_rho(x, y) {
        Ok(rho) => {
            *out = rho;
            DrStatus::Ok
        }
        Err(e) => fail(DrStatus::DegenerateInput, e.to_string()),
    }
}

use domremedy::serde_json;
