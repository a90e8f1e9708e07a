// src/editor.cpp

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

#include "editor.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "json.hpp"
#include "task_vector.hpp"

namespace eigenmerge {

namespace {

// A draw from the sampling distribution has E[norm^2] = r/N; far beyond that
// the moment-matching guarantees no longer apply.
bool IsExtrapolated(std::span<const double> w, std::uint64_t n_speakers) {
  double norm2 = 0.0;
  for (double x : w) norm2 += x * x;
  double typical2 = static_cast<double>(w.size()) / static_cast<double>(n_speakers);
  return norm2 > 25.0 * typical2;
}

std::string SynthProvenance(const SpeakerBasis& basis, std::span<const double> w,
                            const SynthesisInfo& info) {
  nlohmann::json j;
  j["op"] = "synthesize";
  j["basis_fingerprint"] = basis.basis_fingerprint();
  j["schema_fingerprint"] = basis.schema_fingerprint();
  j["w"] = std::vector<double>(w.begin(), w.end());
  j["extrapolated"] = IsExtrapolated(w, basis.num_speakers());
  if (info.seed) j["seed"] = *info.seed;
  if (!info.coeff_label.empty()) j["coeff"] = info.coeff_label;
  return j.dump();
}

std::string InterpProvenance(double alpha, std::uint64_t schema_fp) {
  nlohmann::json j;
  j["op"] = "interpolate";
  j["alpha"] = alpha;
  j["schema_fingerprint"] = schema_fp;
  j["extrapolated"] = alpha < 0.0 || alpha > 1.0;
  return j.dump();
}

void RequireFiniteOut(std::span<const double> values, const std::string& tensor) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite result in tensor \"" + tensor + "\" at index " +
                         std::to_string(i));
    }
  }
}

void RequireBasisSchema(const SpeakerBasis& basis, const FlattenSchema& schema) {
  if (basis.schema_fingerprint() != 0 &&
      basis.schema_fingerprint() != schema.fingerprint()) {
    throw DataError("schema fingerprint does not match the basis");
  }
  if (basis.dim() != schema.total_dim()) {
    throw DataError("schema dimension does not match the basis");
  }
}

}  // namespace

void SynthesizeCheckpoint(const SpeakerBasis& basis, std::span<const double> w,
                          CheckpointReader& pre, const FlattenSchema& schema,
                          const std::string& out_path, const SynthesisInfo& info) {
  RequireBasisSchema(basis, schema);
  RequireSchemaTensors(pre.Index(), schema, "pre-trained");
  if (w.size() != basis.rank()) {
    throw UsageError("coefficient dimension " + std::to_string(w.size()) +
                     " does not match basis rank " + std::to_string(basis.rank()));
  }

  std::map<std::string, std::string> metadata = pre.metadata();
  metadata["eigenmerge.provenance"] = SynthProvenance(basis, w, info);

  std::map<std::string, const SchemaEntry*> by_name;
  for (const auto& entry : schema.entries()) by_name.emplace(entry.name, &entry);

  EvmReader u(basis.u_path());
  EvvReader mean(basis.mean_path());
  EvvReader sd(basis.std_path());

  CheckpointWriter writer(out_path, pre.Index(), metadata);
  std::vector<double> base, delta, col, mu, s;
  for (const auto& [name, spec] : pre.Index()) {
    (void)spec;
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      writer.AppendRaw(name, pre.ReadRaw(name));
      continue;
    }
    const SchemaEntry& entry = *it->second;
    std::uint64_t count = entry.NumElements();
    base.resize(count);
    delta.assign(count, 0.0);
    col.resize(count);
    mu.resize(count);
    s.resize(count);
    pre.ReadValues(name, 0, base);
    mean.Read(entry.offset, mu);
    sd.Read(entry.offset, s);
    for (std::uint64_t j = 0; j < basis.rank(); ++j) {
      std::span<double> slice(col.data(), count);
      u.ReadColumnChunk(j, entry.offset, slice);
      double scale = basis.sigma()[j] * w[j];
      for (std::uint64_t d = 0; d < count; ++d) delta[d] += slice[d] * scale;
    }
    for (std::uint64_t d = 0; d < count; ++d) {
      base[d] += delta[d] * s[d] + mu[d];
    }
    RequireFiniteOut(base, name);
    writer.AppendValues(name, base);
  }
  writer.Finish();
}

Checkpoint SynthesizeCheckpoint(const SpeakerBasis& basis, std::span<const double> w,
                                const Checkpoint& pre, const FlattenSchema& schema,
                                const SynthesisInfo& info) {
  RequireBasisSchema(basis, schema);
  RequireSchemaTensors(IndexOf(pre), schema, "pre-trained");
  if (w.size() != basis.rank()) {
    throw UsageError("coefficient dimension does not match basis rank");
  }
  FlatVector standardized = basis.Reconstruct(w);
  FlatVector mean = ReadFlatVector(basis.mean_path());
  FlatVector sd = ReadFlatVector(basis.std_path());

  Checkpoint out = pre;
  out.metadata["eigenmerge.provenance"] = SynthProvenance(basis, w, info);
  for (const auto& entry : schema.entries()) {
    Tensor& tensor = out.tensors.at(entry.name);
    std::vector<double> values = tensor.ToDoubles();
    for (std::uint64_t d = 0; d < values.size(); ++d) {
      std::uint64_t k = entry.offset + d;
      values[d] += standardized.values[k] * sd.values[k] + mean.values[k];
    }
    RequireFiniteOut(values, entry.name);
    tensor = Tensor::FromValues(tensor.dtype, tensor.shape, values);
  }
  return out;
}

void InterpolateModels(CheckpointReader& a, CheckpointReader& b,
                       CheckpointReader& pre, double alpha,
                       const FlattenSchema& schema, const std::string& out_path) {
  if (!std::isfinite(alpha)) throw UsageError("alpha must be finite");
  RequireSchemaTensors(pre.Index(), schema, "pre-trained");
  RequireSchemaTensors(a.Index(), schema, "model A");
  RequireSchemaTensors(b.Index(), schema, "model B");

  std::map<std::string, std::string> metadata = pre.metadata();
  metadata["eigenmerge.provenance"] = InterpProvenance(alpha, schema.fingerprint());

  std::map<std::string, const SchemaEntry*> by_name;
  for (const auto& entry : schema.entries()) by_name.emplace(entry.name, &entry);

  CheckpointWriter writer(out_path, pre.Index(), metadata);
  std::vector<double> va, vb;
  for (const auto& [name, spec] : pre.Index()) {
    (void)spec;
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      writer.AppendRaw(name, pre.ReadRaw(name));
      continue;
    }
    // Endpoints copy bytes verbatim: the mix arithmetic can flip signed
    // zeros, and the endpoint contract is bytewise identity.
    if (alpha == 0.0) {
      writer.AppendRaw(name, a.ReadRaw(name));
      continue;
    }
    if (alpha == 1.0) {
      writer.AppendRaw(name, b.ReadRaw(name));
      continue;
    }
    std::uint64_t count = it->second->NumElements();
    va.resize(count);
    vb.resize(count);
    a.ReadValues(name, 0, va);
    b.ReadValues(name, 0, vb);
    for (std::uint64_t d = 0; d < count; ++d) {
      va[d] = (1.0 - alpha) * va[d] + alpha * vb[d];
    }
    RequireFiniteOut(va, name);
    writer.AppendValues(name, va);
  }
  writer.Finish();
}

Checkpoint InterpolateModels(const Checkpoint& a, const Checkpoint& b,
                             const Checkpoint& pre, double alpha,
                             const FlattenSchema& schema) {
  if (!std::isfinite(alpha)) throw UsageError("alpha must be finite");
  RequireSchemaTensors(IndexOf(pre), schema, "pre-trained");
  RequireSchemaTensors(IndexOf(a), schema, "model A");
  RequireSchemaTensors(IndexOf(b), schema, "model B");

  Checkpoint out = pre;
  out.metadata["eigenmerge.provenance"] =
      InterpProvenance(alpha, schema.fingerprint());
  for (const auto& entry : schema.entries()) {
    const Tensor& ta = a.tensors.at(entry.name);
    const Tensor& tb = b.tensors.at(entry.name);
    if (alpha == 0.0) {
      out.tensors.at(entry.name) = ta;
      continue;
    }
    if (alpha == 1.0) {
      out.tensors.at(entry.name) = tb;
      continue;
    }
    std::vector<double> va = ta.ToDoubles();
    std::vector<double> vb = tb.ToDoubles();
    for (std::uint64_t d = 0; d < va.size(); ++d) {
      va[d] = (1.0 - alpha) * va[d] + alpha * vb[d];
    }
    RequireFiniteOut(va, entry.name);
    out.tensors.at(entry.name) = Tensor::FromValues(ta.dtype, ta.shape, va);
  }
  return out;
}

std::vector<double> FlipAxis(std::span<const double> w, std::uint64_t k) {
  if (k >= w.size()) {
    throw UsageError("axis " + std::to_string(k) + " out of range for dimension " +
                     std::to_string(w.size()));
  }
  std::vector<double> out(w.begin(), w.end());
  out[k] = -out[k];
  return out;
}

void FlipAxisFile(const std::string& in_path, std::uint64_t k,
                  const std::string& out_path) {
  FlatVector w = ReadFlatVector(in_path);
  FlatVector flipped;
  flipped.fingerprint = w.fingerprint;
  flipped.values = FlipAxis(w.values, k);
  WriteFlatVector(flipped, out_path);
}

}  // namespace eigenmerge
