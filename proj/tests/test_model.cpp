// Copyright 2026 The SmileFusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "smilefusion/error.hpp"
#include "smilefusion/grad_check.hpp"
#include "smilefusion/model.hpp"
#include "support.hpp"

using namespace smilefusion;
using namespace smilefusion::model;
using ad::Shape;
using ad::Tensor;
using fusion::FusionKind;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = sf_test::uniform(rng, lo, hi);
  return t;
}

BackboneConfig tiny(std::size_t frames = 4) {
  BackboneConfig c;
  c.spatial_dim = 8;
  c.output_dim = 16;
  c.temporal_blocks = 2;
  c.heads = 2;
  c.frames = frames;
  return c;
}

Tensor& value(Model& m, const std::string& name) {
  auto* p = m.parameters().find(name);
  REQUIRE_MESSAGE(p != nullptr, name);
  return p->var.mutable_value();
}

void fill(Tensor& t, double v) { std::fill(t.data().begin(), t.data().end(), v); }

void identity(Tensor& t) {
  const std::size_t n = t.dim(0), m = t.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) t[i * m + j] = i == j ? 1.0 : 0.0;
}

std::vector<double> standardize(const std::vector<double>& x, double eps = 1e-5) {
  const double n = double(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= n;
  std::vector<double> out;
  for (double v : x) out.push_back((v - mu) / std::sqrt(var + eps));
  return out;
}

std::vector<double> affine(const Tensor& w, const Tensor& b, const std::vector<double>& x) {
  const std::size_t out = w.dim(0), in = w.dim(1);
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    y[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) y[o] += w[o * in + i] * x[i];
  }
  return y;
}

struct Shapes {
  std::vector<std::pair<std::string, Shape>> list;
  void add(std::string n, Shape s) { list.emplace_back(std::move(n), std::move(s)); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, s] : list) n += ad::shape_size(s);
    return n;
  }
};

// Independent architecture walk: every parameter the Hadamard model should own.
Shapes hadamard_shapes(const BackboneConfig& c, std::size_t q) {
  Shapes s;
  const std::size_t d = c.spatial_dim, ff = c.ff_mult * d;
  s.add("backbone.frame.fc1.weight", {d, 3 * c.input_points});
  s.add("backbone.frame.fc1.bias", {d});
  s.add("backbone.frame.fc2.weight", {d, d});
  s.add("backbone.frame.fc2.bias", {d});
  for (std::size_t i = 0; i < c.temporal_blocks; ++i) {
    const std::string p = "backbone.block" + std::to_string(i);
    s.add(p + ".ln1.gain", {d});
    s.add(p + ".ln1.bias", {d});
    for (const char* n : {".query", ".key", ".value", ".out"}) {
      s.add(p + n + ".weight", {d, d});
      s.add(p + n + ".bias", {d});
    }
    s.add(p + ".ln2.gain", {d});
    s.add(p + ".ln2.bias", {d});
    s.add(p + ".ff1.weight", {ff, d});
    s.add(p + ".ff1.bias", {ff});
    s.add(p + ".ff2.weight", {d, ff});
    s.add(p + ".ff2.bias", {d});
  }
  s.add("backbone.pool.weight", {c.output_dim, d});
  s.add("backbone.pool.bias", {c.output_dim});
  s.add("fusion.project_h.weight", {q, c.output_dim});
  s.add("fusion.project_h.bias", {q});
  s.add("fusion.project_z.weight", {q, 225});
  s.add("fusion.project_z.bias", {q});
  s.add("head.ln.gain", {q});
  s.add("head.ln.bias", {q});
  s.add("head.weight", {1, q});
  s.add("head.bias", {1});
  return s;
}

Var frames_input(const BackboneConfig& c, std::size_t batch, Rng& rng, double range = 1.0) {
  return ad::constant(random_tensor({batch, c.frames, c.input_points, 3}, rng, -range, range));
}

Var dmarker_input(std::size_t batch, Rng& rng, double range = 1.0) {
  return ad::constant(random_tensor({batch, dmarker::kDMarkerSize}, rng, -range, range));
}

}  // namespace

TEST_CASE("backbone configuration") {
  BackboneConfig c;
  CHECK(c.spatial_dim == 128);
  CHECK(c.output_dim == 256);
  CHECK(c.temporal_blocks == 3);
  CHECK(c.heads == 4);
  CHECK(c.dropout == 0.1);
  CHECK(c.frames == 16);
  CHECK(BackboneConfig::paper_long().frames == 64);
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = BackboneConfig();
  c.frames = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);

  const auto mc = ModelConfig::make(BackboneConfig::desk(), FusionKind::FiLM, 32,
                                    InferenceMode::ConstantGate);
  const auto back = model_config_from_json(to_json(mc));
  CHECK(to_json(back) == to_json(mc));
  const auto base = ModelConfig::make(BackboneConfig::desk(), std::nullopt, 32);
  CHECK(!model_config_from_json(to_json(base)).fusion.kind.has_value());
}

TEST_CASE("parameter count matches a shape walk") {
  for (const auto& bc : {BackboneConfig::paper(), BackboneConfig::desk(), tiny()}) {
    for (std::size_t q : {16, 128}) {
      const auto cfg = ModelConfig::make(bc, FusionKind::Hadamard, q);
      Model m(cfg, 1);
      const auto walk = hadamard_shapes(bc, q);
      CHECK(expected_parameter_count(cfg) == walk.total());
      CHECK(m.parameters().count() == walk.total());
      REQUIRE(m.parameters().size() == walk.list.size());
      for (const auto& [name, shape] : walk.list) {
        const auto* p = m.parameters().find(name);
        REQUIRE_MESSAGE(p != nullptr, name);
        CHECK_MESSAGE(p->var.shape() == shape, name);
      }
    }
  }
  for (FusionKind k : fusion::all_fusion_kinds()) {
    const auto cfg = ModelConfig::make(tiny(), k, 16);
    CHECK(Model(cfg, 2).parameters().count() == expected_parameter_count(cfg));
  }
  const auto base = ModelConfig::make(tiny(), std::nullopt, 16);
  CHECK(Model(base, 2).parameters().count() == expected_parameter_count(base));
}

TEST_CASE("auxiliary regression head size") {
  CHECK(auxiliary_head_parameter_count() == 56024);
  CHECK(auxiliary_head_parameter_count(256, 216) == 256 * 216 + 216 + 2 * 256);
  CHECK(fusion::extra_parameter_count(ModelConfig::make(BackboneConfig::paper(),
                                                        FusionKind::Hadamard).fusion) == 0);
  const auto had = ModelConfig::make(BackboneConfig::paper(), FusionKind::Hadamard);
  const std::size_t backbone = backbone_parameter_count(had.backbone);
  // Shared projections plus head on top of the backbone.
  CHECK(expected_parameter_count(had) - backbone == 32896 + 28928 + 385);
}

TEST_CASE("encode_frames properties") {
  Rng rng(1);
  Model m(ModelConfig::make(tiny(), FusionKind::Hadamard, 8), 3);
  const auto& bb = m.backbone();

  Tensor same({1, 4, 11, 3});
  const auto frame = random_tensor({11, 3}, rng);
  for (std::size_t t = 0; t < 4; ++t)
    std::copy(frame.data().begin(), frame.data().end(), same.data().begin() + t * 33);
  const auto e = bb.encode_frames(ad::constant(same)).value();
  for (std::size_t t = 1; t < 4; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(e[t * 8 + j] == e[j]);

  auto x = random_tensor({1, 4, 11, 3}, rng);
  const auto before = bb.encode_frames(ad::constant(x)).value();
  for (std::size_t i = 0; i < 33; ++i) x[2 * 33 + i] += 0.5;
  const auto after = bb.encode_frames(ad::constant(x)).value();
  for (std::size_t t = 0; t < 4; ++t) {
    bool changed = false;
    for (std::size_t j = 0; j < 8; ++j) changed = changed || before[t * 8 + j] != after[t * 8 + j];
    CHECK(changed == (t == 2));
  }

  CHECK_THROWS_AS(bb.encode_frames(ad::constant(Tensor({1, 5, 11, 3}))), ShapeMismatch);
  CHECK_THROWS_AS(bb.encode_frames(ad::constant(Tensor({1, 4, 10, 3}))), ShapeMismatch);
  CHECK(bb.encode_frames(ad::constant(Tensor({2, 4, 33}))).shape() == Shape{2, 4, 8});

  for (const char* n : {"backbone.frame.fc1.weight", "backbone.frame.fc1.bias",
                        "backbone.frame.fc2.weight", "backbone.frame.fc2.bias"})
    fill(value(m, n), 0.0);
  const auto zero = bb.encode_frames(ad::constant(x));
  for (double v : zero.value().data()) CHECK(v == 0.0);
}

TEST_CASE("encode_frames gradient") {
  Rng rng(2);
  Model m(ModelConfig::make(tiny(), FusionKind::Hadamard, 8), 4);
  const auto x = frames_input(tiny(), 2, rng);
  const auto r = ad::constant(random_tensor({2, 4, 8}, rng));
  std::vector<Var> wrt;
  for (const auto& p : m.parameters().items())
    if (p.name.rfind("backbone.frame.", 0) == 0) wrt.push_back(p.var);
  REQUIRE(wrt.size() == 4);
  const auto res = ad::grad_check(
      [&] { return ad::sum(ad::mul(m.backbone().encode_frames(x), r)); }, wrt);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("temporal block on identical rows") {
  auto c = tiny(2);
  c.temporal_blocks = 1;
  Model m(ModelConfig::make(c, FusionKind::Hadamard, 8), 5);
  identity(value(m, "backbone.block0.value.weight"));
  identity(value(m, "backbone.block0.out.weight"));
  Rng rng(3);
  const auto row = random_tensor({8}, rng);
  Tensor s({1, 2, 8});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 8; ++j) s[t * 8 + j] = row[j];
  ForwardContext ctx;
  const auto out = m.backbone().encode_temporal(ad::constant(s), ctx).value();

  std::vector<double> r(row.data().begin(), row.data().end());
  const auto a = standardize(r);
  std::vector<double> x1(8);
  for (std::size_t j = 0; j < 8; ++j) x1[j] = r[j] + a[j];
  auto h = affine(value(m, "backbone.block0.ff1.weight"), value(m, "backbone.block0.ff1.bias"),
                  standardize(x1));
  for (double& v : h) v = std::max(v, 0.0);
  const auto f = affine(value(m, "backbone.block0.ff2.weight"),
                        value(m, "backbone.block0.ff2.bias"), h);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::fabs(out[t * 8 + j] - (x1[j] + f[j])) < 1e-12);
}

TEST_CASE("attention rows sum to one and frames permute equivariantly") {
  Rng rng(4);
  const auto c = tiny(6);
  Model m(ModelConfig::make(c, FusionKind::Hadamard, 8), 6);
  const auto s = random_tensor({2, 6, 8}, rng);
  ForwardContext ctx;
  std::vector<Tensor> att;
  const auto out = m.backbone().encode_temporal(ad::constant(s), ctx, &att).value();
  REQUIRE(att.size() == 2);
  for (const auto& w : att) {
    CHECK(w.shape() == Shape{2, 2, 6, 6});
    for (std::size_t i = 0; i < w.size(); i += 6) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 6; ++j) sum += w[i + j];
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }

  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Tensor p({2, 6, 8});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t j = 0; j < 8; ++j) p[(b * 6 + t) * 8 + j] = s[(b * 6 + perm[t]) * 8 + j];
  const auto pout = m.backbone().encode_temporal(ad::constant(p), ctx).value();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t j = 0; j < 8; ++j)
        CHECK(std::fabs(pout[(b * 6 + t) * 8 + j] - out[(b * 6 + perm[t]) * 8 + j]) < 1e-12);

  auto pc = c;
  pc.positional_encoding = true;
  Model pm(ModelConfig::make(pc, FusionKind::Hadamard, 8), 6);
  const auto a1 = pm.backbone().encode_temporal(ad::constant(s), ctx).value();
  const auto a2 = pm.backbone().encode_temporal(ad::constant(p), ctx).value();
  CHECK(std::fabs(a2[0] - a1[perm[0] * 8]) > 1e-9);
}

TEST_CASE("attention block gradient") {
  Rng rng(5);
  auto c = tiny();
  c.temporal_blocks = 1;
  Model m(ModelConfig::make(c, FusionKind::Hadamard, 8), 7);
  for (auto& p : m.parameters().items())
    for (double& v : p.var.mutable_value().data()) v += 0.1 * sf_test::uniform(rng, -1, 1);
  Var s(random_tensor({2, 4, 8}, rng), true);
  const auto r = ad::constant(random_tensor({2, 4, 8}, rng));
  std::vector<Var> wrt = {s};
  for (const auto& p : m.parameters().items())
    if (p.name.rfind("backbone.block0.", 0) == 0) wrt.push_back(p.var);
  const auto res = ad::grad_check(
      [&] {
        ForwardContext ctx;
        return ad::sum(ad::mul(m.backbone().encode_temporal(s, ctx), r));
      },
      wrt);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("pool_project examples") {
  auto c = tiny();
  c.output_dim = c.spatial_dim;
  Model m(ModelConfig::make(c, FusionKind::Hadamard, 8), 8);
  Rng rng(6);
  const auto r = random_tensor({8}, rng);
  Tensor t({1, 4, 8});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 8; ++j) t[i * 8 + j] = r[j];
  std::vector<double> rv(r.data().begin(), r.data().end());
  const auto want = affine(value(m, "backbone.pool.weight"), value(m, "backbone.pool.bias"), rv);
  const auto got = m.backbone().pool_project(ad::constant(t)).value();
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::fabs(got[j] - want[j]) < 1e-12);

  identity(value(m, "backbone.pool.weight"));
  Tensor two({1, 4, 8});
  two[0] = 2.0;
  two[8 + 7] = 2.0;
  two[16] = 0.0;
  const auto mean = m.backbone().pool_project(ad::constant(two)).value();
  CHECK(mean[0] == 0.5);
  CHECK(mean[7] == 0.5);
  CHECK(mean[3] == 0.0);
}

TEST_CASE("classifier examples") {
  Rng rng(7);
  Model m(ModelConfig::make(tiny(), FusionKind::Hadamard, 8), 9);
  const auto f = ad::constant(random_tensor({3, 8}, rng));
  auto& head = m.head();
  fill(value(m, "head.weight"), 0.0);
  const auto half = head.classify(f);
  for (double v : half.value().data()) CHECK(v == 0.5);
  fill(value(m, "head.bias"), 20.0);
  const auto high = head.classify(f);
  for (double v : high.value().data()) CHECK(v > 0.9999);

  Model g(ModelConfig::make(tiny(), FusionKind::Hadamard, 8), 10);
  Var fv(random_tensor({3, 8}, rng), true);
  const auto& h = g.head();
  const auto res = ad::grad_check([&] { return ad::sum(h.classify(fv)); },
                                  {fv, h.ln_gain, h.ln_bias, h.weight, h.bias});
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("forward is bounded, deterministic and differentiable") {
  Rng rng(8);
  const auto c = tiny();
  Model m(ModelConfig::make(c, FusionKind::Hadamard, 8), 11);
  const auto x = frames_input(c, 3, rng);
  const auto z = dmarker_input(3, rng);
  ForwardContext e1, e2;
  const auto p1 = m.forward(x, z, e1).value();
  const auto p2 = m.forward(x, z, e2).value();
  CHECK(p1.shape() == Shape{3, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p1[i] > 0.0);
    CHECK(p1[i] < 1.0);
    CHECK(p1[i] == p2[i]);
  }

  ForwardContext t1{true, 42}, t2{true, 42}, t3{true, 43};
  const auto d1 = m.forward(x, z, t1).value();
  const auto d2 = m.forward(x, z, t2).value();
  const auto d3 = m.forward(x, z, t3).value();
  CHECK(d1[0] == d2[0]);
  CHECK(d1[0] != d3[0]);

  std::vector<double> labels = {1.0, 0.0, 1.0};
  std::vector<Var> wrt;
  for (const auto& p : m.parameters().items()) wrt.push_back(p.var);
  const auto res = ad::grad_check(
      [&] {
        ForwardContext ctx{true, 99};
        return ad::bce_mean(m.forward(x, z, ctx), labels);
      },
      wrt);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("forward paths stay finite over 100 seeds") {
  const auto c = BackboneConfig::paper();
  const auto& kinds = fusion::all_fusion_kinds();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::optional<FusionKind> kind =
        seed % 16 == 15 ? std::nullopt : std::optional<FusionKind>(kinds[seed % 16]);
    Model m(ModelConfig::make(c, kind, 128), seed);
    Rng rng(seed + 1000);
    ForwardContext ctx{seed % 2 == 0, seed};
    const auto p = m.forward(frames_input(c, 1, rng, 10.0), dmarker_input(1, rng, 10.0), ctx);
    CHECK(std::isfinite(p.value()[0]));
  }
}

TEST_CASE("inference modes") {
  Rng rng(9);
  const auto c = tiny();
  const auto x = frames_input(c, 2, rng);

  Model base(ModelConfig::make(c, std::nullopt, 8), 12);
  CHECK(base.admits_video_only());
  ForwardContext ctx;
  const auto pb = base.forward_inference(x, ctx).value();
  const auto pf = base.forward(x, Var(), ctx).value();
  CHECK(pb[0] == pf[0]);

  Model strict(ModelConfig::make(c, FusionKind::Hadamard, 8), 13);
  CHECK(!strict.admits_video_only());
  CHECK_THROWS_AS(strict.forward_inference(x, ctx), UnsupportedInferenceMode);

  Model gate(ModelConfig::make(c, FusionKind::Hadamard, 8, InferenceMode::ConstantGate), 14);
  CHECK(gate.admits_video_only());
  gate.set_zstar_mean(std::vector<double>(8, 0.3));
  const auto pg = gate.forward_inference(x, ctx).value();
  for (double v : pg.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // The video-only result is the fused path with Z* pinned to its mean.
  const auto h = gate.hstar(x, ctx);
  const auto f = ad::mul(h, ad::constant(Tensor({1, 8}, 0.3)));
  const auto want = gate.head().classify(f).value();
  for (std::size_t i = 0; i < 2; ++i) CHECK(pg[i] == doctest::Approx(want[i]).epsilon(1e-14));

  CHECK(parse_inference_mode("constant-gate") == InferenceMode::ConstantGate);
  CHECK_THROWS_AS(parse_inference_mode("bogus"), InvalidArgument);
}

TEST_CASE("dmarker standardization") {
  Model m(ModelConfig::make(tiny(), FusionKind::Hadamard, 8), 15);
  std::vector<double> mean(225, 1.0), sd(225, 2.0);
  sd[5] = 0.0;
  m.set_dmarker_stats(mean, sd);
  CHECK(m.dmarker_std()[5] == 1.0);
  dmarker::DMarkerVector z{};
  z.fill(5.0);
  const std::vector<dmarker::DMarkerVector> batch = {z};
  const auto t = m.standardize(batch);
  CHECK(t[0] == 2.0);
  CHECK(t[5] == 4.0);
  CHECK_THROWS_AS(m.set_dmarker_stats(std::vector<double>(3), std::vector<double>(3)),
                  ShapeMismatch);
}

TEST_CASE("model save and load") {
  Rng rng(10);
  const auto c = tiny();
  Model m(ModelConfig::make(c, FusionKind::GatedHadamard, 8, InferenceMode::ConstantGate), 16);
  std::vector<double> mean(225), sd(225);
  for (std::size_t i = 0; i < 225; ++i) {
    mean[i] = 0.01 * double(i);
    sd[i] = 1.0 + 0.001 * double(i);
  }
  m.set_dmarker_stats(mean, sd);
  m.set_zstar_mean(std::vector<double>(8, -0.2));
  const auto dir = sf_test::temp_dir("model");
  save_model(m, dir);
  CHECK(std::filesystem::exists(dir / "model_manifest.json"));
  Model back = load_model(dir / "checkpoint.json");
  CHECK(back.config().inference_mode == InferenceMode::ConstantGate);
  CHECK(back.dmarker_mean() == m.dmarker_mean());
  CHECK(back.dmarker_std() == m.dmarker_std());
  CHECK(back.zstar_mean() == m.zstar_mean());

  const auto x = frames_input(c, 2, rng);
  const auto z = dmarker_input(2, rng);
  ForwardContext a, b;
  const auto p1 = m.forward(x, z, a).value();
  const auto p2 = back.forward(x, z, b).value();
  for (std::size_t i = 0; i < 2; ++i) CHECK(p1[i] == p2[i]);
  std::filesystem::remove_all(dir);
}
