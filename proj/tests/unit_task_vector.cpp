// tests/unit_task_vector.cpp

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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "task_vector.hpp"
#include "test_util.hpp"

using namespace eigenmerge;
using emtest::TempDir;

namespace {

// pre plus a dyadic perturbation on the filtered tensors; enc.embed is shared.
struct Pair {
  Checkpoint pre;
  Checkpoint ft;
  FlattenSchema schema;
};

Pair MakePair(SplitMix64& rng, Dtype dtype = Dtype::kF64) {
  Pair p;
  p.pre.tensors["dec.w"] =
      Tensor::FromValues(dtype, {3, 2}, emtest::DyadicValues(rng, 6));
  p.pre.tensors["dec.b"] = Tensor::FromValues(dtype, {4}, emtest::DyadicValues(rng, 4));
  p.pre.tensors["enc.embed"] =
      Tensor::FromValues(dtype, {5}, emtest::DyadicValues(rng, 5));
  p.pre.metadata["family"] = "toy";

  p.ft = p.pre;
  for (const char* name : {"dec.w", "dec.b"}) {
    Tensor& t = p.ft.tensors[name];
    std::vector<double> values = t.ToDoubles();
    for (auto& v : values) v += emtest::DyadicValue(rng);
    t = Tensor::FromValues(t.dtype, t.shape, values);
  }

  ParamFilter filter;
  filter.include_patterns = {"dec.*"};
  p.schema = FlattenSchema::Derive(p.pre, filter);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("task_vector");

TEST_CASE("extract then apply with alpha 1 restores the fine-tuned model exactly") {
  SplitMix64 rng(11);
  for (int round = 0; round < 20; ++round) {
    Pair p = MakePair(rng);
    FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);
    CHECK(tau.dim() == p.schema.total_dim());
    CHECK(tau.fingerprint == p.schema.fingerprint());

    Checkpoint rebuilt = ApplyTaskVector(p.pre, tau, 1.0, p.schema);
    CHECK(rebuilt.tensors.at("dec.w") == p.ft.tensors.at("dec.w"));
    CHECK(rebuilt.tensors.at("dec.b") == p.ft.tensors.at("dec.b"));
    CHECK(rebuilt.tensors.at("enc.embed") == p.pre.tensors.at("enc.embed"));
  }
}

TEST_CASE("alpha scaling is exact on dyadic grids") {
  SplitMix64 rng(12);
  Pair p = MakePair(rng);
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);

  for (double alpha : {0.0, 0.5, 0.25, 2.0, -1.0}) {
    Checkpoint merged = ApplyTaskVector(p.pre, tau, alpha, p.schema);
    std::vector<double> pre_w = p.pre.tensors.at("dec.w").ToDoubles();
    std::vector<double> ft_w = p.ft.tensors.at("dec.w").ToDoubles();
    std::vector<double> got = merged.tensors.at("dec.w").ToDoubles();
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == pre_w[i] + alpha * (ft_w[i] - pre_w[i]));
    }
  }
}

TEST_CASE("f32 models round trip bit-exactly through the f64 vector") {
  SplitMix64 rng(13);
  Pair p = MakePair(rng, Dtype::kF32);
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);
  Checkpoint rebuilt = ApplyTaskVector(p.pre, tau, 1.0, p.schema);
  CHECK(rebuilt.tensors.at("dec.w").data == p.ft.tensors.at("dec.w").data);
  CHECK(rebuilt.tensors.at("dec.b").data == p.ft.tensors.at("dec.b").data);
}

TEST_CASE("streaming and in-memory paths produce identical files") {
  TempDir dir("tv");
  SplitMix64 rng(14);
  Pair p = MakePair(rng);
  WriteCheckpoint(p.pre, dir.File("pre.evc"));
  WriteCheckpoint(p.ft, dir.File("ft.evc"));

  // Extraction.
  {
    CheckpointReader ft(dir.File("ft.evc"));
    CheckpointReader pre(dir.File("pre.evc"));
    ExtractTaskVector(ft, pre, p.schema, dir.File("tau_stream.evv"));
  }
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);
  WriteFlatVector(tau, dir.File("tau_mem.evv"));
  CHECK(emtest::ReadFileBytes(dir.File("tau_stream.evv")) ==
        emtest::ReadFileBytes(dir.File("tau_mem.evv")));

  // Application.
  {
    CheckpointReader pre(dir.File("pre.evc"));
    EvvReader tau_in(dir.File("tau_stream.evv"));
    ApplyTaskVector(pre, tau_in, 0.75, p.schema, dir.File("out_stream.evc"));
  }
  Checkpoint merged = ApplyTaskVector(p.pre, tau, 0.75, p.schema);
  WriteCheckpoint(merged, dir.File("out_mem.evc"));
  CHECK(emtest::ReadFileBytes(dir.File("out_stream.evc")) ==
        emtest::ReadFileBytes(dir.File("out_mem.evc")));
}

TEST_CASE("apply records provenance and keeps the base metadata") {
  SplitMix64 rng(15);
  Pair p = MakePair(rng);
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);
  Checkpoint merged = ApplyTaskVector(p.pre, tau, 0.5, p.schema);

  CHECK(merged.metadata.at("family") == "toy");
  auto prov = nlohmann::json::parse(merged.metadata.at("eigenmerge.provenance"));
  CHECK(prov.at("op") == "apply_task_vector");
  CHECK(prov.at("alpha").get<double>() == 0.5);
}

TEST_CASE("schema violations are reported with the tensor name") {
  SplitMix64 rng(16);
  Pair p = MakePair(rng);

  SUBCASE("missing tensor") {
    Checkpoint broken = p.ft;
    broken.tensors.erase("dec.b");
    CHECK_THROWS_WITH_AS(ExtractTaskVector(broken, p.pre, p.schema),
                         doctest::Contains("dec.b"), DataError);
  }
  SUBCASE("shape mismatch") {
    Checkpoint broken = p.ft;
    broken.tensors["dec.b"] =
        Tensor::FromValues(Dtype::kF64, {5}, emtest::DyadicValues(rng, 5));
    CHECK_THROWS_WITH_AS(ExtractTaskVector(broken, p.pre, p.schema),
                         doctest::Contains("dec.b"), DataError);
  }
  SUBCASE("dtype mismatch") {
    Checkpoint broken = p.ft;
    broken.tensors["dec.w"] =
        Tensor::FromValues(Dtype::kF32, {3, 2}, emtest::DyadicValues(rng, 6));
    CHECK_THROWS_WITH_AS(ExtractTaskVector(broken, p.pre, p.schema),
                         doctest::Contains("dec.w"), DataError);
  }
}

TEST_CASE("vector compatibility checks on apply") {
  SplitMix64 rng(17);
  Pair p = MakePair(rng);
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);

  SUBCASE("wrong fingerprint") {
    FlatVector other = tau;
    other.fingerprint ^= 1;
    CHECK_THROWS_WITH_AS(ApplyTaskVector(p.pre, other, 1.0, p.schema),
                         doctest::Contains("fingerprint"), DataError);
  }
  SUBCASE("null fingerprint is accepted") {
    FlatVector external = tau;
    external.fingerprint = 0;
    Checkpoint merged = ApplyTaskVector(p.pre, external, 1.0, p.schema);
    CHECK(merged.tensors.at("dec.w") == p.ft.tensors.at("dec.w"));
  }
  SUBCASE("wrong dimension") {
    FlatVector other = tau;
    other.values.push_back(0.0);
    other.fingerprint = 0;
    CHECK_THROWS_WITH_AS(ApplyTaskVector(p.pre, other, 1.0, p.schema),
                         doctest::Contains("dim"), DataError);
  }
}

TEST_CASE("non-finite guards") {
  SplitMix64 rng(18);
  Pair p = MakePair(rng);
  FlatVector tau = ExtractTaskVector(p.ft, p.pre, p.schema);

  SUBCASE("non-finite input tensor is a data error") {
    Checkpoint broken = p.ft;
    std::vector<double> values = broken.tensors["dec.b"].ToDoubles();
    values[1] = std::numeric_limits<double>::quiet_NaN();
    broken.tensors["dec.b"] = Tensor::FromValues(Dtype::kF64, {4}, values);
    CHECK_THROWS_WITH_AS(ExtractTaskVector(broken, p.pre, p.schema),
                         doctest::Contains("non-finite"), DataError);
  }
  SUBCASE("non-finite alpha is a usage error") {
    CHECK_THROWS_AS(
        ApplyTaskVector(p.pre, tau, std::numeric_limits<double>::infinity(), p.schema),
        UsageError);
  }
  SUBCASE("overflowing result is a numeric error") {
    Checkpoint hot = p.pre;
    std::vector<double> values(6, 1e308);
    hot.tensors["dec.w"] = Tensor::FromValues(Dtype::kF64, {3, 2}, values);
    Checkpoint hot_ft = hot;
    std::vector<double> values2(6, -1e308);
    hot_ft.tensors["dec.w"] = Tensor::FromValues(Dtype::kF64, {3, 2}, values2);
    hot_ft.tensors["dec.b"] = hot.tensors["dec.b"];
    // -1e308 - 1e308 overflows to -inf in the difference.
    CHECK_THROWS_AS(ExtractTaskVector(hot_ft, hot, p.schema), NumericError);
  }
}

TEST_SUITE_END();
