// src/task_vector.cpp

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

#include "task_vector.hpp"

#include <cmath>
#include <vector>

#include "json.hpp"

namespace eigenmerge {

namespace {

void RequireFinite(const std::vector<double>& values, const std::string& tensor,
                   const std::string& which) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite value in " + which + " tensor \"" + tensor +
                      "\" at index " + std::to_string(i));
    }
  }
}

void RequireFiniteResult(const std::vector<double>& values, const std::string& tensor) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite result in tensor \"" + tensor + "\" at index " +
                         std::to_string(i));
    }
  }
}

std::string ApplyProvenance(double alpha, std::uint64_t schema_fp,
                            std::uint64_t tau_fp) {
  nlohmann::json j;
  j["op"] = "apply_task_vector";
  j["alpha"] = alpha;
  j["schema_fingerprint"] = schema_fp;
  j["tau_fingerprint"] = tau_fp;
  return j.dump();
}

}  // namespace

void RequireSchemaTensors(const TensorIndex& index, const FlattenSchema& schema,
                          const std::string& which) {
  for (const auto& entry : schema.entries()) {
    auto it = index.find(entry.name);
    if (it == index.end()) {
      throw DataError(which + " checkpoint is missing tensor \"" + entry.name + "\"");
    }
    if (it->second.shape != entry.shape) {
      throw DataError(which + " checkpoint tensor \"" + entry.name +
                      "\" has a different shape");
    }
    if (it->second.dtype != entry.dtype) {
      throw DataError(which + " checkpoint tensor \"" + entry.name +
                      "\" has a different dtype");
    }
  }
}

void RequireVectorMatchesSchema(std::uint64_t dim, std::uint64_t fingerprint,
                                const FlattenSchema& schema, const std::string& what) {
  // Fingerprint 0 marks an externally produced vector; only the dimension can
  // be checked for those.
  if (fingerprint != 0 && fingerprint != schema.fingerprint()) {
    throw DataError(what + ": fingerprint " + std::to_string(fingerprint) +
                    " does not match schema fingerprint " +
                    std::to_string(schema.fingerprint()));
  }
  if (dim != schema.total_dim()) {
    throw DataError(what + ": dim " + std::to_string(dim) + " does not match schema (" +
                    std::to_string(schema.total_dim()) + ")");
  }
}

void ExtractTaskVector(CheckpointReader& ft, CheckpointReader& pre,
                       const FlattenSchema& schema, const std::string& out_path) {
  RequireSchemaTensors(pre.Index(), schema, "pre-trained");
  RequireSchemaTensors(ft.Index(), schema, "fine-tuned");
  EvvWriter writer(out_path, schema.total_dim(), schema.fingerprint());
  std::vector<double> a, b;
  for (const auto& entry : schema.entries()) {
    std::uint64_t count = entry.NumElements();
    a.resize(count);
    b.resize(count);
    ft.ReadValues(entry.name, 0, a);
    pre.ReadValues(entry.name, 0, b);
    RequireFinite(a, entry.name, "fine-tuned");
    RequireFinite(b, entry.name, "pre-trained");
    for (std::uint64_t i = 0; i < count; ++i) a[i] -= b[i];
    RequireFiniteResult(a, entry.name);
    writer.Append(a);
  }
  writer.Finish();
}

FlatVector ExtractTaskVector(const Checkpoint& ft, const Checkpoint& pre,
                             const FlattenSchema& schema) {
  RequireSchemaTensors(IndexOf(pre), schema, "pre-trained");
  RequireSchemaTensors(IndexOf(ft), schema, "fine-tuned");
  FlatVector tau;
  tau.fingerprint = schema.fingerprint();
  tau.values.resize(schema.total_dim());
  for (const auto& entry : schema.entries()) {
    std::vector<double> a = ft.tensors.at(entry.name).ToDoubles();
    std::vector<double> b = pre.tensors.at(entry.name).ToDoubles();
    RequireFinite(a, entry.name, "fine-tuned");
    RequireFinite(b, entry.name, "pre-trained");
    for (std::uint64_t i = 0; i < a.size(); ++i) {
      a[i] -= b[i];
      tau.values[entry.offset + i] = a[i];
    }
    RequireFiniteResult(a, entry.name);
  }
  return tau;
}

void ApplyTaskVector(CheckpointReader& pre, EvvReader& tau, double alpha,
                     const FlattenSchema& schema, const std::string& out_path) {
  if (!std::isfinite(alpha)) throw UsageError("alpha must be finite");
  RequireSchemaTensors(pre.Index(), schema, "pre-trained");
  RequireVectorMatchesSchema(tau.dim(), tau.fingerprint(), schema, "task vector");

  std::map<std::string, std::string> metadata = pre.metadata();
  metadata["eigenmerge.provenance"] =
      ApplyProvenance(alpha, schema.fingerprint(), tau.fingerprint());

  std::map<std::string, const SchemaEntry*> by_name;
  for (const auto& entry : schema.entries()) by_name.emplace(entry.name, &entry);

  CheckpointWriter writer(out_path, pre.Index(), metadata);
  std::vector<double> base, delta;
  for (const auto& [name, spec] : pre.Index()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      writer.AppendRaw(name, pre.ReadRaw(name));
      continue;
    }
    const SchemaEntry& entry = *it->second;
    std::uint64_t count = entry.NumElements();
    base.resize(count);
    delta.resize(count);
    pre.ReadValues(name, 0, base);
    tau.Read(entry.offset, delta);
    for (std::uint64_t i = 0; i < count; ++i) base[i] += alpha * delta[i];
    RequireFiniteResult(base, name);
    writer.AppendValues(name, base);
    (void)spec;
  }
  writer.Finish();
}

Checkpoint ApplyTaskVector(const Checkpoint& pre, const FlatVector& tau, double alpha,
                           const FlattenSchema& schema) {
  if (!std::isfinite(alpha)) throw UsageError("alpha must be finite");
  RequireSchemaTensors(IndexOf(pre), schema, "pre-trained");
  RequireVectorMatchesSchema(tau.dim(), tau.fingerprint, schema, "task vector");

  Checkpoint out = pre;
  out.metadata["eigenmerge.provenance"] =
      ApplyProvenance(alpha, schema.fingerprint(), tau.fingerprint);
  for (const auto& entry : schema.entries()) {
    Tensor& tensor = out.tensors.at(entry.name);
    std::vector<double> values = tensor.ToDoubles();
    for (std::uint64_t i = 0; i < values.size(); ++i) {
      values[i] += alpha * tau.values[entry.offset + i];
    }
    RequireFiniteResult(values, entry.name);
    tensor = Tensor::FromValues(tensor.dtype, tensor.shape, values);
  }
  return out;
}

}  // namespace eigenmerge
