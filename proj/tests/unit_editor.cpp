// tests/unit_editor.cpp

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
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "editor.hpp"
#include "json.hpp"
#include "task_vector.hpp"
#include "test_util.hpp"

using namespace eigenmerge;
using emtest::TempDir;

namespace {

// A pre-trained model, five fine-tunes of its dec.* subset, and a basis
// fitted from the five task vectors.
struct Family {
  Checkpoint pre;
  std::vector<Checkpoint> fts;
  std::vector<FlatVector> taus;
  FlattenSchema schema;
  std::string basis_dir;
};

Family MakeFamily(const TempDir& dir, std::uint64_t seed, bool standardize) {
  Family fam;
  GaussianStream gauss(seed);
  auto fill = [&](std::vector<std::uint64_t> shape) {
    std::uint64_t count = 1;
    for (auto d : shape) count *= d;
    std::vector<double> values(count);
    for (auto& v : values) v = gauss.Next();
    return Tensor::FromValues(Dtype::kF64, std::move(shape), values);
  };
  fam.pre.tensors["dec.w"] = fill({4, 3});
  fam.pre.tensors["dec.b"] = fill({5});
  fam.pre.tensors["enc.embed"] = fill({7});
  fam.pre.metadata["family"] = "toy";

  ParamFilter filter;
  filter.include_patterns = {"dec.*"};
  fam.schema = FlattenSchema::Derive(fam.pre, filter);

  std::vector<std::string> tau_paths, labels;
  for (int i = 0; i < 5; ++i) {
    Checkpoint ft = fam.pre;
    for (const auto& name : {"dec.w", "dec.b"}) {
      Tensor& t = ft.tensors[name];
      for (std::uint64_t e = 0; e < t.NumElements(); ++e) {
        t.SetValueAt(e, t.ValueAt(e) + gauss.Next());
      }
    }
    fam.fts.push_back(ft);
    fam.taus.push_back(ExtractTaskVector(ft, fam.pre, fam.schema));
    std::string path = dir.File("tau" + std::to_string(i) + ".evv");
    WriteFlatVector(fam.taus.back(), path);
    tau_paths.push_back(path);
    labels.push_back("spk" + std::to_string(i));
  }

  FitOptions options;
  options.standardize = standardize;
  fam.basis_dir = dir.File(standardize ? "basis_std" : "basis_raw");
  FitBasis(tau_paths, labels, options, fam.basis_dir);
  return fam;
}

nlohmann::json Provenance(const Checkpoint& ckpt) {
  return nlohmann::json::parse(ckpt.metadata.at("eigenmerge.provenance"));
}

}  // namespace

TEST_SUITE_BEGIN("editor");

TEST_CASE("stored coefficients synthesize the fine-tuned models back") {
  TempDir dir("synth");
  for (bool standardize : {false, true}) {
    CAPTURE(standardize);
    Family fam = MakeFamily(dir, standardize ? 31 : 32, standardize);
    SpeakerBasis basis = SpeakerBasis::Open(fam.basis_dir);
    for (std::uint64_t i = 0; i < 5; ++i) {
      Checkpoint got = SynthesizeCheckpoint(basis, basis.Coeff(i), fam.pre, fam.schema);
      for (const auto& name : {"dec.w", "dec.b"}) {
        const Tensor& want = fam.fts[i].tensors.at(name);
        const Tensor& have = got.tensors.at(name);
        for (std::uint64_t e = 0; e < want.NumElements(); ++e) {
          CHECK(have.ValueAt(e) == doctest::Approx(want.ValueAt(e)).epsilon(1e-8));
        }
      }
      // Off-schema tensors come through untouched, bytes included.
      CHECK(got.tensors.at("enc.embed") == fam.pre.tensors.at("enc.embed"));
      CHECK(got.metadata.at("family") == "toy");
    }
  }
}

TEST_CASE("the zero coefficient lands on the task-vector centroid") {
  TempDir dir("centroid");
  Family fam = MakeFamily(dir, 33, true);
  SpeakerBasis basis = SpeakerBasis::Open(fam.basis_dir);
  std::vector<double> w(basis.rank(), 0.0);
  Checkpoint got = SynthesizeCheckpoint(basis, w, fam.pre, fam.schema);

  // pre + mean(tau): the reconstruction is zero, so only mean is added back.
  FlatVector mean_tau;
  mean_tau.values.assign(fam.schema.total_dim(), 0.0);
  for (const auto& tau : fam.taus) {
    for (std::size_t d = 0; d < tau.values.size(); ++d) {
      mean_tau.values[d] += tau.values[d] / 5.0;
    }
  }
  Checkpoint want = ApplyTaskVector(fam.pre, mean_tau, 1.0, fam.schema);
  for (const auto& name : {"dec.w", "dec.b"}) {
    const Tensor& w_t = want.tensors.at(name);
    const Tensor& g_t = got.tensors.at(name);
    for (std::uint64_t e = 0; e < w_t.NumElements(); ++e) {
      CHECK(g_t.ValueAt(e) == doctest::Approx(w_t.ValueAt(e)).epsilon(1e-12));
    }
  }
}

TEST_CASE("streaming synthesis matches the in-memory result byte for byte") {
  TempDir dir("stream");
  Family fam = MakeFamily(dir, 34, true);
  SpeakerBasis basis = SpeakerBasis::Open(fam.basis_dir);
  std::vector<double> w = basis.Coeff(2);

  WriteCheckpoint(fam.pre, dir.File("pre.evc"));
  CheckpointReader pre(dir.File("pre.evc"));
  SynthesisInfo info;
  info.seed = 99;
  info.coeff_label = "spk2";
  SynthesizeCheckpoint(basis, w, pre, fam.schema, dir.File("stream.evc"), info);

  Checkpoint mem = SynthesizeCheckpoint(basis, w, fam.pre, fam.schema, info);
  WriteCheckpoint(mem, dir.File("mem.evc"));
  CHECK(emtest::ReadFileBytes(dir.File("stream.evc")) ==
        emtest::ReadFileBytes(dir.File("mem.evc")));
}

TEST_CASE("synthesis provenance records the request") {
  TempDir dir("prov");
  Family fam = MakeFamily(dir, 35, true);
  SpeakerBasis basis = SpeakerBasis::Open(fam.basis_dir);
  std::vector<double> w(basis.rank(), 0.01);

  SUBCASE("plain draw") {
    Checkpoint got = SynthesizeCheckpoint(basis, w, fam.pre, fam.schema);
    nlohmann::json j = Provenance(got);
    CHECK(j.at("op") == "synthesize");
    CHECK(j.at("basis_fingerprint").get<std::uint64_t>() == basis.basis_fingerprint());
    CHECK(j.at("schema_fingerprint").get<std::uint64_t>() == fam.schema.fingerprint());
    CHECK(j.at("w").get<std::vector<double>>() == w);
    CHECK(j.at("extrapolated") == false);
    CHECK(!j.contains("seed"));
    CHECK(!j.contains("coeff"));
  }
  SUBCASE("seed and label are carried through when given") {
    SynthesisInfo info;
    info.seed = 4242;
    info.coeff_label = "sample_007";
    Checkpoint got = SynthesizeCheckpoint(basis, w, fam.pre, fam.schema, info);
    nlohmann::json j = Provenance(got);
    CHECK(j.at("seed").get<std::uint64_t>() == 4242);
    CHECK(j.at("coeff") == "sample_007");
  }
  SUBCASE("norms far beyond the sampling distribution are flagged") {
    // E[norm^2] = rank / n_speakers; 25x that is the cutoff.
    double typical2 = static_cast<double>(basis.rank()) / 5.0;
    std::vector<double> big(basis.rank(), 0.0);
    big[0] = std::sqrt(26.0 * typical2);
    Checkpoint got = SynthesizeCheckpoint(basis, big, fam.pre, fam.schema);
    CHECK(Provenance(got).at("extrapolated") == true);

    std::vector<double> ok(basis.rank(), 0.0);
    ok[0] = std::sqrt(24.0 * typical2);
    Checkpoint fine = SynthesizeCheckpoint(basis, ok, fam.pre, fam.schema);
    CHECK(Provenance(fine).at("extrapolated") == false);
  }
}

TEST_CASE("synthesis rejects mismatched inputs") {
  TempDir dir("mismatch");
  Family fam = MakeFamily(dir, 36, true);
  SpeakerBasis basis = SpeakerBasis::Open(fam.basis_dir);

  SUBCASE("wrong coefficient length") {
    std::vector<double> w(basis.rank() + 2, 0.0);
    CHECK_THROWS_AS(SynthesizeCheckpoint(basis, w, fam.pre, fam.schema), UsageError);
  }
  SUBCASE("schema from a different filter") {
    ParamFilter filter;
    filter.include_patterns = {"dec.b"};
    FlattenSchema other = FlattenSchema::Derive(fam.pre, filter);
    std::vector<double> w(basis.rank(), 0.0);
    CHECK_THROWS_WITH_AS(SynthesizeCheckpoint(basis, w, fam.pre, other),
                         doctest::Contains("does not match the basis"), DataError);
  }
  SUBCASE("pre-trained model missing a schema tensor") {
    Checkpoint chopped = fam.pre;
    chopped.tensors.erase("dec.b");
    std::vector<double> w(basis.rank(), 0.0);
    CHECK_THROWS_AS(SynthesizeCheckpoint(basis, w, chopped, fam.schema), DataError);
  }
  SUBCASE("overflow in the output is a numeric error") {
    std::vector<double> w(basis.rank(), 1e308);
    CHECK_THROWS_WITH_AS(SynthesizeCheckpoint(basis, w, fam.pre, fam.schema),
                         doctest::Contains("non-finite"), NumericError);
  }
}

TEST_CASE("interpolation endpoints copy the inputs verbatim") {
  TempDir dir("interp");
  Family fam = MakeFamily(dir, 37, true);
  const Checkpoint& a = fam.fts[0];
  const Checkpoint& b = fam.fts[1];

  WriteCheckpoint(fam.pre, dir.File("pre.evc"));
  WriteCheckpoint(a, dir.File("a.evc"));
  WriteCheckpoint(b, dir.File("b.evc"));

  for (double alpha : {0.0, 1.0}) {
    CAPTURE(alpha);
    CheckpointReader ra(dir.File("a.evc"));
    CheckpointReader rb(dir.File("b.evc"));
    CheckpointReader rp(dir.File("pre.evc"));
    std::string out = dir.File("end" + std::to_string(alpha) + ".evc");
    InterpolateModels(ra, rb, rp, alpha, fam.schema, out);

    const Checkpoint& endpoint = alpha == 0.0 ? a : b;
    Checkpoint got = ReadCheckpoint(out);
    for (const auto& name : {"dec.w", "dec.b"}) {
      // Byte equality, not numeric closeness: endpoints skip the arithmetic.
      CHECK(got.tensors.at(name).data == endpoint.tensors.at(name).data);
    }
    CHECK(got.tensors.at("enc.embed").data == fam.pre.tensors.at("enc.embed").data);
  }
}

TEST_CASE("midpoint interpolation is the exact average") {
  TempDir dir("mid");
  Family fam = MakeFamily(dir, 38, true);
  Checkpoint got = InterpolateModels(fam.fts[0], fam.fts[1], fam.pre, 0.5, fam.schema);
  for (const auto& name : {"dec.w", "dec.b"}) {
    const Tensor& ta = fam.fts[0].tensors.at(name);
    const Tensor& tb = fam.fts[1].tensors.at(name);
    const Tensor& tg = got.tensors.at(name);
    for (std::uint64_t e = 0; e < ta.NumElements(); ++e) {
      // 0.5*a + 0.5*b in one rounding each; the check is for bit equality
      // with that exact expression.
      CHECK(tg.ValueAt(e) == 0.5 * ta.ValueAt(e) + 0.5 * tb.ValueAt(e));
    }
  }

  nlohmann::json j = Provenance(got);
  CHECK(j.at("op") == "interpolate");
  CHECK(j.at("alpha") == 0.5);
  CHECK(j.at("extrapolated") == false);

  Checkpoint outside = InterpolateModels(fam.fts[0], fam.fts[1], fam.pre, 1.5, fam.schema);
  CHECK(Provenance(outside).at("extrapolated") == true);

  CHECK_THROWS_WITH_AS(
      InterpolateModels(fam.fts[0], fam.fts[1], fam.pre,
                        std::numeric_limits<double>::infinity(), fam.schema),
      doctest::Contains("alpha must be finite"), UsageError);
}

TEST_CASE("streaming interpolation matches the in-memory result byte for byte") {
  TempDir dir("interpstream");
  Family fam = MakeFamily(dir, 39, true);
  WriteCheckpoint(fam.pre, dir.File("pre.evc"));
  WriteCheckpoint(fam.fts[0], dir.File("a.evc"));
  WriteCheckpoint(fam.fts[1], dir.File("b.evc"));

  CheckpointReader ra(dir.File("a.evc"));
  CheckpointReader rb(dir.File("b.evc"));
  CheckpointReader rp(dir.File("pre.evc"));
  InterpolateModels(ra, rb, rp, 0.25, fam.schema, dir.File("stream.evc"));

  Checkpoint mem = InterpolateModels(fam.fts[0], fam.fts[1], fam.pre, 0.25, fam.schema);
  WriteCheckpoint(mem, dir.File("mem.evc"));
  CHECK(emtest::ReadFileBytes(dir.File("stream.evc")) ==
        emtest::ReadFileBytes(dir.File("mem.evc")));
}

TEST_CASE("axis flips are involutions") {
  SplitMix64 rng(40);
  GaussianStream gauss(41);
  for (int round = 0; round < 1000; ++round) {
    std::size_t dim = 1 + rng.Next() % 12;
    std::vector<double> w(dim);
    for (auto& v : w) v = gauss.Next();
    std::uint64_t k = rng.Next() % dim;
    std::vector<double> once = FlipAxis(w, k);
    CHECK(once[k] == -w[k]);
    std::vector<double> twice = FlipAxis(once, k);
    CHECK(twice == w);
  }
  std::vector<double> w = {1.0, 2.0};
  CHECK_THROWS_WITH_AS(FlipAxis(w, 2), doctest::Contains("out of range"), UsageError);
}

TEST_CASE("file-level flips preserve the header and invert exactly") {
  TempDir dir("flip");
  FlatVector v;
  v.fingerprint = 0xABCDEF;
  v.values = {0.5, -1.25, 3.0};
  WriteFlatVector(v, dir.File("w.evv"));

  FlipAxisFile(dir.File("w.evv"), 1, dir.File("w1.evv"));
  FlatVector flipped = ReadFlatVector(dir.File("w1.evv"));
  CHECK(flipped.fingerprint == v.fingerprint);
  CHECK(flipped.values == std::vector<double>{0.5, 1.25, 3.0});

  FlipAxisFile(dir.File("w1.evv"), 1, dir.File("w2.evv"));
  CHECK(emtest::ReadFileBytes(dir.File("w.evv")) ==
        emtest::ReadFileBytes(dir.File("w2.evv")));

  CHECK_THROWS_AS(FlipAxisFile(dir.File("w.evv"), 3, dir.File("w3.evv")), UsageError);
}

TEST_SUITE_END();
