#ifndef QCNET_H
#define QCNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum QcnetStatus {
  QCNET_STATUS_OK = 0,
  QCNET_STATUS_NULL_POINTER = 1,
  QCNET_STATUS_INVALID_UTF8 = 2,
  QCNET_STATUS_IO = 3,
  QCNET_STATUS_PARSE = 4,
  QCNET_STATUS_GRAPH = 5,
  QCNET_STATUS_FEATURE = 6,
  QCNET_STATUS_CHECKPOINT = 7,
  QCNET_STATUS_CHECKPOINT_MISMATCH = 8,
  QCNET_STATUS_MODEL = 9,
  QCNET_STATUS_HOMOLOGY = 10,
  QCNET_STATUS_PANIC = 11,
} QcnetStatus;

/**
 * A quotient complex built from a structure.
 */
typedef struct QcnetComplex QcnetComplex;

/**
 * A trained model together with the neighbor count and atom table it was
 * trained with.
 */
typedef struct QcnetModel QcnetModel;

/**
 * A parsed crystal structure.
 */
typedef struct QcnetStructure QcnetStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qcnet_version(void);

/**
 * Description of the last failure on this thread; empty after a success.
 * The pointer stays valid until the next qcnet call on the same thread.
 */
const char *qcnet_last_error(void);

/**
 * Parse a structure from text. `format` is `"json"` or `"poscar"`.
 *
 * # Safety
 * `text` and `format` must be NUL-terminated strings; `out` must be writable.
 */
enum QcnetStatus qcnet_structure_parse(const char *text,
                                       const char *format,
                                       struct QcnetStructure **out);

/**
 * Read a structure file; the format follows the file extension.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QcnetStatus qcnet_structure_read(const char *path, struct QcnetStructure **out);

/**
 * Number of atoms in the unit cell, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle from this library.
 */
uintptr_t qcnet_structure_num_atoms(const struct QcnetStructure *s);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void qcnet_structure_free(struct QcnetStructure *s);

/**
 * Build the quotient complex of the `k`-nearest-neighbor graph.
 *
 * # Safety
 * `s` must be a live structure handle; `out` must be writable.
 */
enum QcnetStatus qcnet_complex_build(const struct QcnetStructure *s,
                                     uintptr_t k,
                                     struct QcnetComplex **out);

/**
 * Vertex, directed edge and triangle counts.
 *
 * # Safety
 * `c` must be a live complex handle; the out pointers must be writable.
 */
enum QcnetStatus qcnet_complex_counts(const struct QcnetComplex *c,
                                      uintptr_t *n_vertices,
                                      uintptr_t *n_edges,
                                      uintptr_t *n_triangles);

/**
 * Complex as JSON; release with `qcnet_string_free`.
 *
 * # Safety
 * `c` must be a live complex handle; `out` must be writable.
 */
enum QcnetStatus qcnet_complex_to_json(const struct QcnetComplex *c, char **out);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void qcnet_complex_free(struct QcnetComplex *c);

/**
 * Load a checkpoint. The neighbor count and atom table recorded in its
 * sidecar are used for prediction; without them, k = 12 and the built-in
 * placeholder table.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QcnetStatus qcnet_model_load(const char *path, struct QcnetModel **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void qcnet_model_free(struct QcnetModel *m);

/**
 * Eval-mode prediction for one structure.
 *
 * # Safety
 * `m` and `s` must be live handles; `out` must be writable.
 */
enum QcnetStatus qcnet_model_predict(const struct QcnetModel *m,
                                     const struct QcnetStructure *s,
                                     double *out);

/**
 * Homology comparison of a complex (JSON list of maximal simplices) with
 * its vertex-glued version. `partition_json` may be null for singleton
 * classes; a nonzero `pairwise` selects the pairwise gluing. The report is
 * written as JSON to `out` and `*all_pass` receives 1 when every verdict
 * holds.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed); out
 * pointers must be writable.
 */
enum QcnetStatus qcnet_homology_verify(const char *complex_json,
                                       const char *partition_json,
                                       int pairwise,
                                       char **out,
                                       int *all_pass);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void qcnet_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCNET_H */
