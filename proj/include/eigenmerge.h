/* include/eigenmerge.h */

/* Copyright 2026  The eigenmerge authors */

/* Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
 * WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
 * MERCHANTABLITY OR NON-INFRINGEMENT.
 * See the Apache 2 License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the eigenmerge core library.
 *
 * Conventions:
 *   - Every fallible call returns an em_status; EM_OK is 0.  On failure,
 *     em_last_error() returns a message for the calling thread, valid until
 *     that thread's next library call.
 *   - Objects are opaque handles created and released by the library.
 *   - Strings and buffers returned through out-parameters are owned by the
 *     caller; release them with em_string_free / em_buffer_free.
 *   - Paths are UTF-8, NUL-terminated.
 */

#ifndef EIGENMERGE_H_
#define EIGENMERGE_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum em_status {
  EM_OK = 0,
  EM_ERR_USAGE = 2,   /* bad arguments or call sequence */
  EM_ERR_DATA = 3,    /* malformed or inconsistent input data */
  EM_ERR_NUMERIC = 4, /* computation produced no usable result */
  EM_ERR_IO = 5       /* file system failure */
} em_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* em_last_error(void);

const char* em_version(void);

void em_string_free(char* s);
void em_buffer_free(double* p);

/* ---- checkpoints ------------------------------------------------------- */

typedef struct em_checkpoint em_checkpoint;

em_status em_checkpoint_new(em_checkpoint** out);
em_status em_checkpoint_read(const char* path, em_checkpoint** out);
em_status em_checkpoint_write(const em_checkpoint* ckpt, const char* path);
void em_checkpoint_free(em_checkpoint* ckpt);

em_status em_checkpoint_num_tensors(const em_checkpoint* ckpt, uint64_t* out);
em_status em_checkpoint_tensor_name(const em_checkpoint* ckpt, uint64_t index,
                                    char** out);
/* dtype is "f32" or "f64". */
em_status em_checkpoint_set_tensor(em_checkpoint* ckpt, const char* name,
                                   const char* dtype, const uint64_t* shape,
                                   uint64_t rank, const double* values);
em_status em_checkpoint_tensor_dim(const em_checkpoint* ckpt, const char* name,
                                   uint64_t* out);
em_status em_checkpoint_tensor_values(const em_checkpoint* ckpt, const char* name,
                                      double* out, uint64_t capacity);
em_status em_checkpoint_meta_set(em_checkpoint* ckpt, const char* key,
                                 const char* value);
/* *out is NULL when the key is absent. */
em_status em_checkpoint_meta_get(const em_checkpoint* ckpt, const char* key,
                                 char** out);

/* JSON description of the tensor-layout differences between two checkpoint
 * files: {"only_in_a": [...], "only_in_b": [...], "mismatches": [...]}. */
em_status em_checkpoint_diff(const char* path_a, const char* path_b, char** json_out);

/* ---- flat vectors ------------------------------------------------------ */

em_status em_vector_write(const char* path, const double* values, uint64_t dim,
                          uint64_t fingerprint);
/* *values_out is malloc'd with *dim_out doubles. */
em_status em_vector_read(const char* path, double** values_out, uint64_t* dim_out,
                         uint64_t* fingerprint_out);

/* ---- flatten schemas --------------------------------------------------- */

typedef struct em_schema em_schema;

/* Derives the flat layout of the checkpoint's tensors selected by the
 * include/exclude glob patterns (empty include list selects everything). */
em_status em_schema_build(const char* ckpt_path, const char* const* include,
                          size_t n_include, const char* const* exclude,
                          size_t n_exclude, em_schema** out);
void em_schema_free(em_schema* schema);
em_status em_schema_dim(const em_schema* schema, uint64_t* out);
em_status em_schema_fingerprint(const em_schema* schema, uint64_t* out);

em_status em_glob_match(const char* pattern, const char* text, int* match_out);

/* ---- task vectors ------------------------------------------------------ */

em_status em_extract_task_vector(const char* ft_path, const char* pre_path,
                                 const em_schema* schema, const char* out_vec_path);
em_status em_apply_task_vector(const char* pre_path, const char* vec_path,
                               double alpha, const em_schema* schema,
                               const char* out_ckpt_path);

/* ---- speaker basis ----------------------------------------------------- */

typedef struct em_basis em_basis;

typedef struct em_fit_options {
  double rank_tol;     /* relative singular-value cutoff, in (0, 1) */
  int standardize;     /* nonzero: per-dimension standardization first */
  uint64_t chunk_size; /* scalars held in memory per streaming block */
  double eps_std;      /* dimensions below this std are floored to 1 */
  int threads;         /* worker cap; results do not depend on it */
} em_fit_options;

void em_fit_options_init(em_fit_options* options);

em_status em_fit_basis(const char* const* vec_paths, const char* const* labels,
                       size_t n, const em_fit_options* options, const char* out_dir);

em_status em_basis_open(const char* dir, em_basis** out);
void em_basis_free(em_basis* basis);

em_status em_basis_dim(const em_basis* basis, uint64_t* out);
em_status em_basis_rank(const em_basis* basis, uint64_t* out);
em_status em_basis_num_speakers(const em_basis* basis, uint64_t* out);
em_status em_basis_sigma(const em_basis* basis, double* out, uint64_t capacity);
em_status em_basis_coeff(const em_basis* basis, uint64_t speaker, double* out,
                         uint64_t capacity);
em_status em_basis_label(const em_basis* basis, uint64_t speaker, char** out);
em_status em_basis_schema_fingerprint(const em_basis* basis, uint64_t* out);
em_status em_basis_fingerprint(const em_basis* basis, uint64_t* out);

/* count draws of rank components each, written consecutively into out
 * (count * rank doubles).  Component variance is 1/N with N the base-speaker
 * count; identical (seed, count) give identical draws. */
em_status em_basis_sample(const em_basis* basis, uint64_t seed, uint64_t count,
                          double* out);

/* U diag(sigma) w in standardized coordinates; out holds dim doubles. */
em_status em_basis_reconstruct(const em_basis* basis, const double* w, uint64_t wlen,
                               double* out);
/* Least-squares coefficient of a standardized dim-vector; out holds rank
 * doubles. */
em_status em_basis_project(const em_basis* basis, const double* standardized,
                           uint64_t dim, double* out);

/* ---- model editing ----------------------------------------------------- */

/* seed may be NULL; label may be NULL or empty.  Both are provenance only. */
em_status em_synthesize(const em_basis* basis, const double* w, uint64_t wlen,
                        const char* pre_path, const em_schema* schema,
                        const char* out_path, const char* label,
                        const uint64_t* seed);
em_status em_interpolate(const char* a_path, const char* b_path, const char* pre_path,
                         double alpha, const em_schema* schema, const char* out_path);
em_status em_flip_axis(const char* vec_path, uint64_t axis, const char* out_path);

/* ---- analysis ---------------------------------------------------------- */

em_status em_cosine_similarity(const double* a, const double* b, uint64_t dim,
                               double* out);

/* Per-row and summary CSVs of max cosine similarity between each generated
 * vector file and its nearest base vector file. */
em_status em_similarity_report(const char* const* gen_paths,
                               const char* const* gen_labels, size_t n_gen,
                               const char* const* base_paths,
                               const char* const* base_labels, size_t n_base,
                               char** rows_csv_out, char** summary_csv_out);

em_status em_coeff_scatter(const em_basis* basis, uint64_t comp_i, uint64_t comp_j,
                           char** csv_out);

/* ---- synthetic corpora ------------------------------------------------- */

/* JSON spec of the default synthetic corpus (see README for the fields). */
em_status em_default_corpus_spec(char** json_out);
/* spec_json NULL means the default spec. */
em_status em_generate_corpus(const char* spec_json, const char* out_dir);
/* JSON report: {"agreement": k, "n_speakers": n, "global_sign": s,
 * "cosine": c}. */
em_status em_verify_axis_recovery(const char* manifest_path, const em_basis* basis,
                                  char** json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EIGENMERGE_H_ */
