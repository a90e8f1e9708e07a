// src/task_vector.hpp

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

#ifndef EIGENMERGE_TASK_VECTOR_HPP_
#define EIGENMERGE_TASK_VECTOR_HPP_

#include <map>
#include <string>

#include "checkpoint.hpp"
#include "flatten.hpp"

namespace eigenmerge {

// Difference of two checkpoints over the schema subset, in schema order.
// Streams tensor-by-tensor, so memory stays at O(largest tensor).
void ExtractTaskVector(CheckpointReader& ft, CheckpointReader& pre,
                       const FlattenSchema& schema, const std::string& out_path);
FlatVector ExtractTaskVector(const Checkpoint& ft, const Checkpoint& pre,
                             const FlattenSchema& schema);

// pre + alpha * tau over the schema subset; tensors outside the schema are
// copied from pre byte for byte.  Output metadata carries the operation under
// "eigenmerge.provenance".
void ApplyTaskVector(CheckpointReader& pre, EvvReader& tau, double alpha,
                     const FlattenSchema& schema, const std::string& out_path);
Checkpoint ApplyTaskVector(const Checkpoint& pre, const FlatVector& tau, double alpha,
                           const FlattenSchema& schema);

// Shared guards.
void RequireSchemaTensors(const TensorIndex& index, const FlattenSchema& schema,
                          const std::string& which);
void RequireVectorMatchesSchema(std::uint64_t dim, std::uint64_t fingerprint,
                                const FlattenSchema& schema, const std::string& what);

}  // namespace eigenmerge

#endif  // EIGENMERGE_TASK_VECTOR_HPP_
