/* domremedy C API. Generated by cbindgen; do not edit by hand. */

#ifndef DOMREMEDY_H
#define DOMREMEDY_H

/* See crates/domremedy-ffi/src/lib.rs for ownership and safety rules. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes for fallible entry points.
typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_ARGUMENT = 1,
  DR_STATUS_EMPTY_DOCUMENT = 2,
  DR_STATUS_INVALID_BUDGET = 3,
  DR_STATUS_RESOURCE_LIMIT = 4,
  DR_STATUS_DEGENERATE_INPUT = 5,
  DR_STATUS_OUT_OF_RANGE = 6,
  DR_STATUS_REASSEMBLY_CONFLICT = 7,
  DR_STATUS_INTERNAL = 8,
} DrStatus;

// A parsed document behind an opaque handle.
typedef struct DrDocument DrDocument;

// A chunk plan behind an opaque handle.
typedef struct DrManifest DrManifest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the most recent error on this thread, or NULL.
// Free with `dr_string_free`.
char *dr_last_error_message(void);

// Library version as a static string; do not free.
const char *dr_version(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be NULL or a pointer previously returned by a `dr_*` function
// documented to transfer string ownership, not yet freed.
void dr_string_free(char *s);

// Parse HTML bytes into a document handle. Malformed markup is repaired;
// only an entirely empty input fails. The tree is settled to its
// parse/serialize fixed point.
//
// # Safety
// `html` must point to `len` readable bytes; `out` must be a valid pointer.
enum DrStatus dr_document_parse(const uint8_t *html, size_t len, struct DrDocument **out);

// # Safety
// `doc` must be NULL or an unfreed handle from `dr_document_parse`/
// `dr_reassemble`.
void dr_document_free(struct DrDocument *doc);

// Serialize a document back to HTML. Free the result with `dr_string_free`.
//
// # Safety
// `doc` must be a valid unfreed document handle.
char *dr_document_serialize(const struct DrDocument *doc);

// Canonical JSON encoding of the document tree. Free with `dr_string_free`.
//
// # Safety
// `doc` must be a valid unfreed document handle.
char *dr_document_to_json(const struct DrDocument *doc);

// Total node count of the document tree; 0 for NULL.
//
// # Safety
// `doc` must be NULL or a valid unfreed document handle.
size_t dr_document_node_count(const struct DrDocument *doc);

// Maximum root-to-leaf depth in edges; 0 for NULL.
//
// # Safety
// `doc` must be NULL or a valid unfreed document handle.
size_t dr_document_max_depth(const struct DrDocument *doc);

// Structural equality of two document trees.
//
// # Safety
// Both handles must be valid unfreed document handles.
bool dr_tree_equal(const struct DrDocument *a, const struct DrDocument *b);

// Unit-cost ordered tree edit distance between two documents.
//
// # Safety
// Both handles and `out` must be valid pointers.
enum DrStatus dr_tree_edit_distance(const struct DrDocument *a,
                                    const struct DrDocument *b,
                                    uint64_t *out);

// Classified structural diff between two documents as change-set JSON.
// Free with `dr_string_free`.
//
// # Safety
// Both handles must be valid unfreed document handles.
char *dr_diff_trees(const struct DrDocument *original, const struct DrDocument *modified);

// Split a document into chunks of at most `budget` tokens (default
// estimator), reserving `headroom` within the downstream output cap.
// Chunk identifiers derive from `seed`, so plans are reproducible.
//
// # Safety
// `doc` and `out` must be valid pointers.
enum DrStatus dr_plan_chunks(const struct DrDocument *doc,
                             size_t budget,
                             size_t headroom,
                             uint64_t seed,
                             struct DrManifest **out);

// # Safety
// `manifest` must be NULL or an unfreed handle from `dr_plan_chunks`.
void dr_manifest_free(struct DrManifest *manifest);

// Number of chunks in the plan; 0 for NULL.
//
// # Safety
// `manifest` must be NULL or a valid unfreed manifest handle.
size_t dr_manifest_chunk_count(const struct DrManifest *manifest);

// Serialized HTML of the chunk at `index` (ordinal order), or NULL when out
// of range. Free with `dr_string_free`.
//
// # Safety
// `manifest` must be a valid unfreed manifest handle.
char *dr_manifest_chunk_html(const struct DrManifest *manifest, size_t index);

// Chunk identifier at `index`, or NULL. Free with `dr_string_free`.
//
// # Safety
// `manifest` must be a valid unfreed manifest handle.
char *dr_manifest_chunk_id(const struct DrManifest *manifest, size_t index);

// Manifest as JSON (chunk metadata, anchors, preserved blobs; fragment
// bodies excluded as in the on-disk format). Free with `dr_string_free`.
//
// # Safety
// `manifest` must be a valid unfreed manifest handle.
char *dr_manifest_to_json(const struct DrManifest *manifest);

// Splice modified chunk HTML back into a document. `chunk_htmls` holds one
// NUL-terminated string per chunk, in ordinal order.
//
// # Safety
// `manifest` must be valid; `chunk_htmls` must point to `count` valid
// C strings; `out` must be a valid pointer.
enum DrStatus dr_reassemble(const struct DrManifest *manifest,
                            const char *const *chunk_htmls,
                            size_t count,
                            struct DrDocument **out);

// Chunk the document, reassemble unmodified, and compare. `ok` is the
// equality verdict; `ted` the tree edit distance when measurable (u64::MAX
// when omitted).
//
// # Safety
// `doc`, `ok`, and `ted` must be valid pointers.
enum DrStatus dr_verify_roundtrip(const struct DrDocument *doc,
                                  size_t budget,
                                  size_t headroom,
                                  bool *ok,
                                  uint64_t *ted);

// Spearman rank correlation of two equal-length vectors.
//
// # Safety
// `xs` and `ys` must point to `len` readable doubles; `out` must be valid.
enum DrStatus dr_spearman_rho(const double *xs, const double *ys, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOMREMEDY_H */
