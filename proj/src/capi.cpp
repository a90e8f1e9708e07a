// src/capi.cpp

// Copyright 2026  The eigenmerge authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "eigenmerge.h"

#include <cstdlib>
#include <cstring>
#include <iterator>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "corpus.hpp"
#include "editor.hpp"
#include "flatten.hpp"
#include "similarity.hpp"
#include "speaker_space.hpp"
#include "task_vector.hpp"

struct em_checkpoint {
  eigenmerge::Checkpoint impl;
};

struct em_schema {
  eigenmerge::FlattenSchema impl;
};

struct em_basis {
  eigenmerge::SpeakerBasis impl;
};

namespace {

using namespace eigenmerge;

thread_local std::string t_last_error = "ok";

em_status Fail(em_status code, const std::string& message) {
  t_last_error = message;
  return code;
}

template <typename Fn>
em_status Guarded(Fn&& fn) {
  try {
    fn();
    return EM_OK;
  } catch (const UsageError& e) {
    return Fail(EM_ERR_USAGE, e.what());
  } catch (const DataError& e) {
    return Fail(EM_ERR_DATA, e.what());
  } catch (const NumericError& e) {
    return Fail(EM_ERR_NUMERIC, e.what());
  } catch (const IoError& e) {
    return Fail(EM_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(EM_ERR_IO, "out of memory");
  } catch (const std::exception& e) {
    return Fail(EM_ERR_DATA, e.what());
  }
}

em_status RequireArgs(bool ok) {
  if (!ok) return Fail(EM_ERR_USAGE, "null argument");
  return EM_OK;
}

char* DupString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> ToStrings(const char* const* items, size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!items[i]) throw UsageError("null string in argument list");
    out.emplace_back(items[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* em_last_error(void) { return t_last_error.c_str(); }

const char* em_version(void) { return "1.0.0"; }

void em_string_free(char* s) { std::free(s); }

void em_buffer_free(double* p) { std::free(p); }

/* ---- checkpoints ------------------------------------------------------- */

em_status em_checkpoint_new(em_checkpoint** out) {
  if (em_status s = RequireArgs(out != nullptr)) return s;
  return Guarded([&] { *out = new em_checkpoint(); });
}

em_status em_checkpoint_read(const char* path, em_checkpoint** out) {
  if (em_status s = RequireArgs(path && out)) return s;
  return Guarded([&] {
    auto ckpt = std::make_unique<em_checkpoint>();
    ckpt->impl = ReadCheckpoint(path);
    *out = ckpt.release();
  });
}

em_status em_checkpoint_write(const em_checkpoint* ckpt, const char* path) {
  if (em_status s = RequireArgs(ckpt && path)) return s;
  return Guarded([&] { WriteCheckpoint(ckpt->impl, path); });
}

void em_checkpoint_free(em_checkpoint* ckpt) { delete ckpt; }

em_status em_checkpoint_num_tensors(const em_checkpoint* ckpt, uint64_t* out) {
  if (em_status s = RequireArgs(ckpt && out)) return s;
  *out = ckpt->impl.tensors.size();
  return EM_OK;
}

em_status em_checkpoint_tensor_name(const em_checkpoint* ckpt, uint64_t index,
                                    char** out) {
  if (em_status s = RequireArgs(ckpt && out)) return s;
  return Guarded([&] {
    if (index >= ckpt->impl.tensors.size()) {
      throw UsageError("tensor index out of range");
    }
    auto it = ckpt->impl.tensors.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(index));
    *out = DupString(it->first);
  });
}

em_status em_checkpoint_set_tensor(em_checkpoint* ckpt, const char* name,
                                   const char* dtype, const uint64_t* shape,
                                   uint64_t rank, const double* values) {
  if (em_status s = RequireArgs(ckpt && name && dtype && (shape || rank == 0))) {
    return s;
  }
  return Guarded([&] {
    if (*name == '\0') throw DataError("empty tensor name");
    std::vector<std::uint64_t> dims(shape, shape + rank);
    Dtype dt = DtypeFromName(dtype);
    std::uint64_t count = 1;
    for (std::uint64_t d : dims) count *= d;
    if (count > 0 && !values) throw UsageError("null values");
    ckpt->impl.tensors[name] =
        Tensor::FromValues(dt, dims, std::span<const double>(values, count));
  });
}

em_status em_checkpoint_tensor_dim(const em_checkpoint* ckpt, const char* name,
                                   uint64_t* out) {
  if (em_status s = RequireArgs(ckpt && name && out)) return s;
  return Guarded([&] {
    auto it = ckpt->impl.tensors.find(name);
    if (it == ckpt->impl.tensors.end()) {
      throw DataError("no tensor \"" + std::string(name) + "\"");
    }
    *out = it->second.NumElements();
  });
}

em_status em_checkpoint_tensor_values(const em_checkpoint* ckpt, const char* name,
                                      double* out, uint64_t capacity) {
  if (em_status s = RequireArgs(ckpt && name && out)) return s;
  return Guarded([&] {
    auto it = ckpt->impl.tensors.find(name);
    if (it == ckpt->impl.tensors.end()) {
      throw DataError("no tensor \"" + std::string(name) + "\"");
    }
    if (capacity < it->second.NumElements()) {
      throw UsageError("buffer too small for tensor \"" + std::string(name) + "\"");
    }
    std::vector<double> values = it->second.ToDoubles();
    std::memcpy(out, values.data(), values.size() * sizeof(double));
  });
}

em_status em_checkpoint_meta_set(em_checkpoint* ckpt, const char* key,
                                 const char* value) {
  if (em_status s = RequireArgs(ckpt && key && value)) return s;
  ckpt->impl.metadata[key] = value;
  return EM_OK;
}

em_status em_checkpoint_meta_get(const em_checkpoint* ckpt, const char* key,
                                 char** out) {
  if (em_status s = RequireArgs(ckpt && key && out)) return s;
  return Guarded([&] {
    auto it = ckpt->impl.metadata.find(key);
    *out = (it == ckpt->impl.metadata.end()) ? nullptr : DupString(it->second);
  });
}

em_status em_checkpoint_diff(const char* path_a, const char* path_b,
                             char** json_out) {
  if (em_status s = RequireArgs(path_a && path_b && json_out)) return s;
  return Guarded([&] {
    CheckpointReader a(path_a);
    CheckpointReader b(path_b);
    *json_out = DupString(DiffSchemas(a.Index(), b.Index()).ToJson());
  });
}

/* ---- flat vectors ------------------------------------------------------ */

em_status em_vector_write(const char* path, const double* values, uint64_t dim,
                          uint64_t fingerprint) {
  if (em_status s = RequireArgs(path && (values || dim == 0))) return s;
  return Guarded([&] {
    EvvWriter writer(path, dim, fingerprint);
    writer.Append(std::span<const double>(values, dim));
    writer.Finish();
  });
}

em_status em_vector_read(const char* path, double** values_out, uint64_t* dim_out,
                         uint64_t* fingerprint_out) {
  if (em_status s = RequireArgs(path && values_out && dim_out && fingerprint_out)) {
    return s;
  }
  return Guarded([&] {
    EvvReader reader(path);
    double* buf = static_cast<double*>(std::malloc(sizeof(double) * reader.dim()));
    if (!buf && reader.dim() > 0) throw std::bad_alloc();
    std::span<double> span(buf, reader.dim());
    reader.Read(0, span);
    *values_out = buf;
    *dim_out = reader.dim();
    *fingerprint_out = reader.fingerprint();
  });
}

/* ---- flatten schemas --------------------------------------------------- */

em_status em_schema_build(const char* ckpt_path, const char* const* include,
                          size_t n_include, const char* const* exclude,
                          size_t n_exclude, em_schema** out) {
  if (em_status s = RequireArgs(ckpt_path && out && (include || n_include == 0) &&
                                (exclude || n_exclude == 0))) {
    return s;
  }
  return Guarded([&] {
    ParamFilter filter;
    filter.include_patterns = ToStrings(include, n_include);
    filter.exclude_patterns = ToStrings(exclude, n_exclude);
    CheckpointReader reader(ckpt_path);
    auto schema = std::make_unique<em_schema>();
    schema->impl = FlattenSchema::Derive(reader.Index(), filter);
    *out = schema.release();
  });
}

void em_schema_free(em_schema* schema) { delete schema; }

em_status em_schema_dim(const em_schema* schema, uint64_t* out) {
  if (em_status s = RequireArgs(schema && out)) return s;
  *out = schema->impl.total_dim();
  return EM_OK;
}

em_status em_schema_fingerprint(const em_schema* schema, uint64_t* out) {
  if (em_status s = RequireArgs(schema && out)) return s;
  *out = schema->impl.fingerprint();
  return EM_OK;
}

em_status em_glob_match(const char* pattern, const char* text, int* match_out) {
  if (em_status s = RequireArgs(pattern && text && match_out)) return s;
  return Guarded([&] { *match_out = GlobMatch(pattern, text) ? 1 : 0; });
}

/* ---- task vectors ------------------------------------------------------ */

em_status em_extract_task_vector(const char* ft_path, const char* pre_path,
                                 const em_schema* schema, const char* out_vec_path) {
  if (em_status s = RequireArgs(ft_path && pre_path && schema && out_vec_path)) {
    return s;
  }
  return Guarded([&] {
    CheckpointReader ft(ft_path);
    CheckpointReader pre(pre_path);
    ExtractTaskVector(ft, pre, schema->impl, out_vec_path);
  });
}

em_status em_apply_task_vector(const char* pre_path, const char* vec_path,
                               double alpha, const em_schema* schema,
                               const char* out_ckpt_path) {
  if (em_status s = RequireArgs(pre_path && vec_path && schema && out_ckpt_path)) {
    return s;
  }
  return Guarded([&] {
    CheckpointReader pre(pre_path);
    EvvReader tau(vec_path);
    ApplyTaskVector(pre, tau, alpha, schema->impl, out_ckpt_path);
  });
}

/* ---- speaker basis ----------------------------------------------------- */

void em_fit_options_init(em_fit_options* options) {
  if (!options) return;
  FitOptions defaults;
  options->rank_tol = defaults.rank_tol;
  options->standardize = defaults.standardize ? 1 : 0;
  options->chunk_size = defaults.chunk_size;
  options->eps_std = defaults.eps_std;
  options->threads = defaults.threads;
}

em_status em_fit_basis(const char* const* vec_paths, const char* const* labels,
                       size_t n, const em_fit_options* options, const char* out_dir) {
  if (em_status s = RequireArgs(vec_paths && labels && options && out_dir)) return s;
  return Guarded([&] {
    FitOptions opts;
    opts.rank_tol = options->rank_tol;
    opts.standardize = options->standardize != 0;
    opts.chunk_size = options->chunk_size;
    opts.eps_std = options->eps_std;
    opts.threads = options->threads;
    FitBasis(ToStrings(vec_paths, n), ToStrings(labels, n), opts, out_dir);
  });
}

em_status em_basis_open(const char* dir, em_basis** out) {
  if (em_status s = RequireArgs(dir && out)) return s;
  return Guarded([&] {
    auto basis = std::make_unique<em_basis>();
    basis->impl = SpeakerBasis::Open(dir);
    *out = basis.release();
  });
}

void em_basis_free(em_basis* basis) { delete basis; }

em_status em_basis_dim(const em_basis* basis, uint64_t* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  *out = basis->impl.dim();
  return EM_OK;
}

em_status em_basis_rank(const em_basis* basis, uint64_t* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  *out = basis->impl.rank();
  return EM_OK;
}

em_status em_basis_num_speakers(const em_basis* basis, uint64_t* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  *out = basis->impl.num_speakers();
  return EM_OK;
}

em_status em_basis_sigma(const em_basis* basis, double* out, uint64_t capacity) {
  if (em_status s = RequireArgs(basis && out)) return s;
  return Guarded([&] {
    if (capacity < basis->impl.rank()) throw UsageError("buffer too small for sigma");
    const auto& sigma = basis->impl.sigma();
    std::memcpy(out, sigma.data(), sigma.size() * sizeof(double));
  });
}

em_status em_basis_coeff(const em_basis* basis, uint64_t speaker, double* out,
                         uint64_t capacity) {
  if (em_status s = RequireArgs(basis && out)) return s;
  return Guarded([&] {
    if (capacity < basis->impl.rank()) {
      throw UsageError("buffer too small for a coefficient");
    }
    std::vector<double> w = basis->impl.Coeff(speaker);
    std::memcpy(out, w.data(), w.size() * sizeof(double));
  });
}

em_status em_basis_label(const em_basis* basis, uint64_t speaker, char** out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  return Guarded([&] {
    if (speaker >= basis->impl.num_speakers()) {
      throw UsageError("speaker index out of range");
    }
    *out = DupString(basis->impl.labels()[speaker]);
  });
}

em_status em_basis_schema_fingerprint(const em_basis* basis, uint64_t* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  *out = basis->impl.schema_fingerprint();
  return EM_OK;
}

em_status em_basis_fingerprint(const em_basis* basis, uint64_t* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  *out = basis->impl.basis_fingerprint();
  return EM_OK;
}

em_status em_basis_sample(const em_basis* basis, uint64_t seed, uint64_t count,
                          double* out) {
  if (em_status s = RequireArgs(basis && out)) return s;
  return Guarded([&] {
    auto draws = basis->impl.SampleCoeffs(seed, count);
    std::uint64_t rank = basis->impl.rank();
    for (std::uint64_t i = 0; i < draws.size(); ++i) {
      std::memcpy(out + i * rank, draws[i].data(), rank * sizeof(double));
    }
  });
}

em_status em_basis_reconstruct(const em_basis* basis, const double* w, uint64_t wlen,
                               double* out) {
  if (em_status s = RequireArgs(basis && w && out)) return s;
  return Guarded([&] {
    FlatVector vec =
        basis->impl.Reconstruct(std::span<const double>(w, wlen));
    std::memcpy(out, vec.values.data(), vec.values.size() * sizeof(double));
  });
}

em_status em_basis_project(const em_basis* basis, const double* standardized,
                           uint64_t dim, double* out) {
  if (em_status s = RequireArgs(basis && standardized && out)) return s;
  return Guarded([&] {
    FlatVector vec;
    vec.values.assign(standardized, standardized + dim);
    std::vector<double> w = basis->impl.Project(vec);
    std::memcpy(out, w.data(), w.size() * sizeof(double));
  });
}

/* ---- model editing ----------------------------------------------------- */

em_status em_synthesize(const em_basis* basis, const double* w, uint64_t wlen,
                        const char* pre_path, const em_schema* schema,
                        const char* out_path, const char* label,
                        const uint64_t* seed) {
  if (em_status s = RequireArgs(basis && w && pre_path && schema && out_path)) {
    return s;
  }
  return Guarded([&] {
    SynthesisInfo info;
    if (seed) info.seed = *seed;
    if (label) info.coeff_label = label;
    CheckpointReader pre(pre_path);
    SynthesizeCheckpoint(basis->impl, std::span<const double>(w, wlen), pre,
                         schema->impl, out_path, info);
  });
}

em_status em_interpolate(const char* a_path, const char* b_path, const char* pre_path,
                         double alpha, const em_schema* schema, const char* out_path) {
  if (em_status s = RequireArgs(a_path && b_path && pre_path && schema && out_path)) {
    return s;
  }
  return Guarded([&] {
    CheckpointReader a(a_path);
    CheckpointReader b(b_path);
    CheckpointReader pre(pre_path);
    InterpolateModels(a, b, pre, alpha, schema->impl, out_path);
  });
}

em_status em_flip_axis(const char* vec_path, uint64_t axis, const char* out_path) {
  if (em_status s = RequireArgs(vec_path && out_path)) return s;
  return Guarded([&] { FlipAxisFile(vec_path, axis, out_path); });
}

/* ---- analysis ---------------------------------------------------------- */

em_status em_cosine_similarity(const double* a, const double* b, uint64_t dim,
                               double* out) {
  if (em_status s = RequireArgs(a && b && out)) return s;
  return Guarded([&] {
    *out = CosineSimilarity(std::span<const double>(a, dim),
                            std::span<const double>(b, dim));
  });
}

em_status em_similarity_report(const char* const* gen_paths,
                               const char* const* gen_labels, size_t n_gen,
                               const char* const* base_paths,
                               const char* const* base_labels, size_t n_base,
                               char** rows_csv_out, char** summary_csv_out) {
  if (em_status s = RequireArgs(gen_paths && base_paths && rows_csv_out &&
                                summary_csv_out)) {
    return s;
  }
  return Guarded([&] {
    auto load = [](const char* const* paths, const char* const* labels, size_t n) {
      std::vector<LabeledVector> out;
      out.reserve(n);
      for (size_t i = 0; i < n; ++i) {
        if (!paths[i]) throw UsageError("null path in argument list");
        LabeledVector item;
        item.label = (labels && labels[i]) ? labels[i] : paths[i];
        item.vec = ReadFlatVector(paths[i]);
        out.push_back(std::move(item));
      }
      return out;
    };
    SimilarityReport report =
        MaxSimilarityReport(load(gen_paths, gen_labels, n_gen),
                            load(base_paths, base_labels, n_base));
    *rows_csv_out = DupString(report.RowsCsv());
    *summary_csv_out = DupString(report.SummaryCsv());
  });
}

em_status em_coeff_scatter(const em_basis* basis, uint64_t comp_i, uint64_t comp_j,
                           char** csv_out) {
  if (em_status s = RequireArgs(basis && csv_out)) return s;
  return Guarded([&] {
    *csv_out = DupString(CoeffScatterCsv(basis->impl, comp_i, comp_j));
  });
}

/* ---- synthetic corpora ------------------------------------------------- */

em_status em_default_corpus_spec(char** json_out) {
  if (em_status s = RequireArgs(json_out != nullptr)) return s;
  return Guarded([&] { *json_out = DupString(CorpusSpecToJson(DefaultCorpusSpec())); });
}

em_status em_generate_corpus(const char* spec_json, const char* out_dir) {
  if (em_status s = RequireArgs(out_dir != nullptr)) return s;
  return Guarded([&] {
    CorpusSpec spec =
        spec_json ? CorpusSpecFromJson(spec_json) : DefaultCorpusSpec();
    GenerateCorpus(spec, out_dir);
  });
}

em_status em_verify_axis_recovery(const char* manifest_path, const em_basis* basis,
                                  char** json_out) {
  if (em_status s = RequireArgs(manifest_path && basis && json_out)) return s;
  return Guarded([&] {
    *json_out = DupString(VerifyAxisRecovery(manifest_path, basis->impl).ToJson());
  });
}

} /* extern "C" */
