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

#include "smilefusion/grad_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "smilefusion/fusion.hpp"
#include "smilefusion/grad_check.hpp"
#include "smilefusion/model.hpp"
#include "smilefusion/tensor.hpp"

namespace smilefusion {

namespace {

using ad::Shape;
using ad::Tensor;
using ad::Var;

struct Case {
  std::string group, name;
  // Builds the function under test and the variables to perturb.
  std::function<std::pair<std::function<Var()>, std::vector<Var>>(Rng&)> build;
};

Tensor randn(Shape shape, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> d(0.0, sd);
  for (double& v : t.data()) v = d(rng);
  return t;
}

Var leaf(Shape shape, Rng& rng, double sd = 1.0) { return Var(randn(std::move(shape), rng, sd), true); }

// Positive entries bounded away from zero, for ops with kinks at 0.
Var leaf_away_from_zero(Shape shape, Rng& rng) {
  Tensor t = randn(std::move(shape), rng);
  for (double& v : t.data()) v = (v >= 0 ? 0.2 : -0.2) + v;
  return Var(std::move(t), true);
}

// Scalar probe sum(out * r) with a fixed random r.
std::function<Var()> probe(std::function<Var()> f, Rng& rng) {
  const Shape shape = f().shape();
  auto r = std::make_shared<Tensor>(randn(shape, rng));
  return [f, r] { return ad::sum(ad::mul(f(), ad::constant(*r))); };
}

using Built = std::pair<std::function<Var()>, std::vector<Var>>;

Case unary(const std::string& name, std::function<Var(const Var&)> op, bool kink = false) {
  return {"op", name, [op, kink](Rng& rng) -> Built {
            Var x = kink ? leaf_away_from_zero({3, 4}, rng) : leaf({3, 4}, rng);
            return {probe([=] { return op(x); }, rng), {x}};
          }};
}

Case binary(const std::string& name, std::function<Var(const Var&, const Var&)> op, Shape a,
            Shape b) {
  return {"op", name, [op, a, b](Rng& rng) -> Built {
            Var x = leaf(a, rng), y = leaf(b, rng);
            return {probe([=] { return op(x, y); }, rng), {x, y}};
          }};
}

// Wrong derivative on purpose: reports 3x for d(x^2)/dx.
Var faulty_square(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= v;
  return ad::make_result("faulty_square", std::move(out), {x}, [](ad::Node& self) {
    ad::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] * 3.0 * p.value[i];
  });
}

std::vector<Case> op_cases() {
  std::vector<Case> c;
  c.push_back(binary("add", ad::add, {2, 3, 4}, {3, 1}));
  c.push_back(binary("sub", ad::sub, {3, 4}, {2, 1, 4}));
  c.push_back(binary("mul", ad::mul, {2, 3, 4}, {4}));
  c.push_back(unary("scale", [](const Var& x) { return ad::scale(x, -1.7); }));
  c.push_back(unary("add_scalar", [](const Var& x) { return ad::add_scalar(x, 0.3); }));
  c.push_back(unary("one_minus", ad::one_minus));
  c.push_back(binary("matmul", ad::matmul, {2, 3, 4}, {4, 5}));
  c.push_back({"op", "linear", [](Rng& rng) -> Built {
                 Var x = leaf({2, 3, 5}, rng), w = leaf({4, 5}, rng), b = leaf({4}, rng);
                 return {probe([=] { return ad::linear(x, w, b); }, rng), {x, w, b}};
               }});
  c.push_back(unary("sum", [](const Var& x) { return ad::scale(ad::sum(ad::mul(x, x)), 0.5); }));
  c.push_back(unary("sum_over_axis", [](const Var& x) { return ad::sum_over_axis(x, 0); }));
  c.push_back(unary("mean_over_axis", [](const Var& x) { return ad::mean_over_axis(x, -1, true); }));
  c.push_back(unary("max_over_axis", [](const Var& x) { return ad::max_over_axis(x, 1); }));
  c.push_back(unary("transpose", [](const Var& x) { return ad::transpose(x, 0, 1); }));
  c.push_back(unary("reshape", [](const Var& x) { return ad::reshape(x, {2, 6}); }));
  c.push_back(binary("concat", [](const Var& a, const Var& b) { return ad::concat({a, b}, 1); },
                     {3, 2}, {3, 4}));
  c.push_back(unary("slice", [](const Var& x) { return ad::slice(x, 1, 1, 2); }));
  c.push_back(unary("sigmoid", ad::sigmoid));
  c.push_back(unary("tanh", ad::tanh));
  c.push_back(unary("relu", ad::relu, true));
  c.push_back(unary("softmax_over_axis", [](const Var& x) { return ad::softmax_over_axis(x, -1); }));
  c.push_back(unary("layer_norm", [](const Var& x) { return ad::layer_norm(x, -1); }));
  c.push_back(unary("dropout", [](const Var& x) { return ad::dropout(x, 0.3, true, 99); }));
  c.push_back({"op", "bilinear_form", [](Rng& rng) -> Built {
                 Var x = leaf({2, 3}, rng), core = leaf({4, 3, 5}, rng), z = leaf({2, 5}, rng);
                 return {probe([=] { return ad::bilinear_form(x, core, z); }, rng), {x, core, z}};
               }});
  c.push_back({"op", "bce_mean", [](Rng& rng) -> Built {
                 Var logits = leaf({6}, rng);
                 auto y = std::make_shared<std::vector<double>>();
                 for (int i = 0; i < 6; ++i) y->push_back(i % 2);
                 return {[=] { return ad::bce_mean(ad::sigmoid(logits), *y); }, {logits}};
               }});
  return c;
}

std::vector<Var> all_params(ad::ParameterSet& ps) {
  std::vector<Var> v;
  for (auto& p : ps.items()) v.push_back(p.var);
  return v;
}

Case fusion_case(fusion::FusionKind kind) {
  return {"fusion", std::string(fusion::fusion_name(kind)), [kind](Rng& rng) -> Built {
            fusion::FusionConfig cfg;
            cfg.kind = kind;
            cfg.input_dim = 16;
            cfg.dmarker_dim = 12;
            cfg.width = 8;
            cfg.heads = 2;
            cfg.tokens = 4;
            auto params = std::make_shared<ad::ParameterSet>();
            auto layer = std::make_shared<fusion::FusionLayer>(cfg, *params, rng);
            // Keep bias and gate parameters away from their special init values.
            for (auto& p : params->items()) {
              for (double& v : p.var.mutable_value().data()) v += 0.1 * std::normal_distribution<double>()(rng);
            }
            Var h = leaf({3, 16}, rng), z = leaf({3, 12}, rng);
            std::vector<Var> wrt = all_params(*params);
            wrt.push_back(h);
            wrt.push_back(z);
            return {probe([=] { (void)params; return layer->fuse(h, z); }, rng), wrt};
          }};
}

model::ModelConfig tiny_model(std::optional<fusion::FusionKind> kind) {
  model::BackboneConfig b;
  b.spatial_dim = 8;
  b.output_dim = 16;
  b.temporal_blocks = 2;
  b.heads = 2;
  b.frames = 4;
  b.dropout = 0.1;
  model::ModelConfig c = model::ModelConfig::make(b, kind, 8);
  c.fusion.dmarker_dim = 12;
  c.fusion.heads = 2;
  c.validate();
  return c;
}

Case model_case(const std::string& name, std::optional<fusion::FusionKind> kind) {
  return {"model", name, [kind](Rng& rng) -> Built {
            auto m = std::make_shared<model::Model>(tiny_model(kind), rng());
            Var x = ad::constant(randn({3, 4, 11, 3}, rng, 0.5));
            Var z = kind ? ad::constant(randn({3, 12}, rng)) : Var();
            auto y = std::make_shared<std::vector<double>>(std::vector<double>{1, 0, 1});
            const std::uint64_t seed = rng();
            auto f = [=] {
              model::ForwardContext ctx{true, seed, 0};
              return ad::bce_mean(m->forward(x, z, ctx), *y);
            };
            return {f, all_params(m->parameters())};
          }};
}

Case attention_case() {
  return {"model", "temporal-attention-block", [](Rng& rng) -> Built {
            model::BackboneConfig b;
            b.spatial_dim = 8;
            b.output_dim = 16;
            b.temporal_blocks = 1;
            b.heads = 2;
            b.frames = 5;
            b.dropout = 0.0;
            auto ps = std::make_shared<ad::ParameterSet>();
            auto bb = std::make_shared<model::Backbone>(b, *ps, rng);
            Var s = leaf({2, 5, 8}, rng);
            std::vector<Var> wrt;
            for (auto& p : ps->items()) {
              if (p.name.find("block0") != std::string::npos) wrt.push_back(p.var);
            }
            wrt.push_back(s);
            return {probe([=] {
                      (void)ps;
                      model::ForwardContext ctx;
                      return bb->encode_temporal(s, ctx);
                    }, rng),
                    wrt};
          }};
}

Case classifier_case() {
  return {"model", "classifier-head", [](Rng& rng) -> Built {
            auto ps = std::make_shared<ad::ParameterSet>();
            auto head = std::make_shared<model::ClassifierHead>(8, *ps, rng);
            Var f = leaf({4, 8}, rng);
            auto y = std::make_shared<std::vector<double>>(std::vector<double>{1, 0, 0, 1});
            std::vector<Var> wrt = all_params(*ps);
            wrt.push_back(f);
            return {[=] { (void)ps; return ad::bce_mean(head->classify(f), *y); }, wrt};
          }};
}

}  // namespace

std::vector<GradTarget> run_grad_suite(const GradSuiteOptions& opt) {
  std::vector<Case> cases = op_cases();
  for (auto k : fusion::all_fusion_kinds()) cases.push_back(fusion_case(k));
  cases.push_back(attention_case());
  cases.push_back(classifier_case());
  cases.push_back(model_case("end-to-end-hadamard", fusion::FusionKind::Hadamard));
  cases.push_back(model_case("end-to-end-baseline", std::nullopt));
  if (opt.inject_fault) cases.push_back(unary("faulty_square", faulty_square));

  std::vector<GradTarget> out;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    GradTarget t{cases[ci].group, cases[ci].name};
    for (std::uint64_t seed : opt.seeds) {
      Rng rng(ad::splitmix64(seed ^ ad::splitmix64(ci + 1)));
      auto [f, wrt] = cases[ci].build(rng);
      const auto r = ad::grad_check(f, wrt);
      t.max_rel_error = std::max(t.max_rel_error, r.max_rel_error);
      t.entries += r.entries;
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace smilefusion
