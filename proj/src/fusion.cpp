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

#include "smilefusion/fusion.hpp"

#include <cmath>

#include "smilefusion/error.hpp"

namespace smilefusion::fusion {

namespace {

constexpr std::array<std::string_view, kFusionKindCount> kNames{
    "concat",
    "gated-concat",
    "additive",
    "hadamard",
    "gated-hadamard",
    "attention",
    "multi-head-attention",
    "cross-attention",
    "multi-head-cross-attention",
    "film",
    "film-hadamard",
    "bilinear",
    "bilinear-hadamard",
    "factorized-bilinear",
    "factorized-hadamard",
};

bool is_gated(FusionKind k) {
  return k == FusionKind::GatedConcat || k == FusionKind::GatedHadamard;
}
bool is_film(FusionKind k) { return k == FusionKind::FiLM || k == FusionKind::FiLMHadamard; }
bool is_bilinear(FusionKind k) {
  return k == FusionKind::Bilinear || k == FusionKind::BilinearHadamard;
}
bool is_factorized(FusionKind k) {
  return k == FusionKind::FactorizedBilinear || k == FusionKind::FactorizedHadamard;
}
bool is_cross(FusionKind k) {
  return k == FusionKind::CrossAttention || k == FusionKind::MultiHeadCrossAttention;
}

}  // namespace

const std::array<FusionKind, kFusionKindCount>& all_fusion_kinds() {
  static const std::array<FusionKind, kFusionKindCount> kinds = [] {
    std::array<FusionKind, kFusionKindCount> k{};
    for (std::size_t i = 0; i < kFusionKindCount; ++i) k[i] = static_cast<FusionKind>(i);
    return k;
  }();
  return kinds;
}

std::string_view fusion_name(FusionKind kind) {
  return kNames.at(static_cast<std::size_t>(kind));
}

std::string fusion_name_list() {
  std::string out;
  for (std::string_view n : kNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

FusionKind parse_fusion_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<FusionKind>(i);
  }
  throw UnknownKind("unknown fusion kind '" + std::string(name) +
                    "'; valid kinds: " + fusion_name_list());
}

std::size_t output_width(FusionKind kind, std::size_t q) {
  return kind == FusionKind::Concat || kind == FusionKind::GatedConcat ? 2 * q : q;
}

void FusionConfig::validate() const {
  if (input_dim == 0 || dmarker_dim == 0 || width == 0) {
    throw InvalidArgument("fusion dimensions must be positive");
  }
  if (!kind) return;
  if (*kind == FusionKind::MultiHeadAttention && (heads == 0 || width % heads != 0)) {
    throw InvalidArgument("fusion width must be divisible by heads");
  }
  if (is_cross(*kind)) {
    if (tokens == 0 || width % tokens != 0) {
      throw InvalidArgument("fusion width must be divisible by tokens");
    }
    const std::size_t h = *kind == FusionKind::MultiHeadCrossAttention ? heads : 1;
    if (h == 0 || (width / tokens) % h != 0) {
      throw InvalidArgument("token width must be divisible by heads");
    }
  }
}

std::size_t projection_parameter_count(const FusionConfig& cfg) {
  const std::size_t q = cfg.width;
  std::size_t n = q * cfg.input_dim + q;
  if (cfg.kind) n += q * cfg.dmarker_dim + q;
  return n;
}

std::size_t extra_parameter_count(const FusionConfig& cfg) {
  if (!cfg.kind) return 0;
  const std::size_t q = cfg.width;
  const FusionKind k = *cfg.kind;
  if (is_gated(k)) return 2 * q * q + q;
  if (k == FusionKind::Attention) return q + 1;
  if (k == FusionKind::MultiHeadAttention) return q + cfg.heads;
  if (is_cross(k)) {
    const std::size_t dt = q / cfg.tokens;
    return 4 * dt * dt;
  }
  if (is_film(k)) return 2 * (q * q + q);
  if (is_bilinear(k)) return q * q * q;
  if (is_factorized(k)) return 2 * q * q;
  return 0;
}

FusionLayer::FusionLayer(const FusionConfig& cfg, ad::ParameterSet& params, Rng& rng,
                         const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t q = cfg_.width;
  w_h_ = params.add(prefix + ".project_h.weight", he_normal({q, cfg_.input_dim}, cfg_.input_dim, rng));
  b_h_ = params.add(prefix + ".project_h.bias", ad::Tensor({q}, 0.0));
  if (!cfg_.kind) return;
  w_z_ = params.add(prefix + ".project_z.weight",
                    he_normal({q, cfg_.dmarker_dim}, cfg_.dmarker_dim, rng));
  b_z_ = params.add(prefix + ".project_z.bias", ad::Tensor({q}, 0.0));

  auto add = [&](const std::string& key, ad::Tensor init) {
    extras_[key] = params.add(prefix + "." + key, std::move(init));
  };
  const FusionKind k = *cfg_.kind;
  if (is_gated(k)) {
    add("gate.weight", he_normal({q, 2 * q}, 2 * q, rng));
    add("gate.bias", ad::Tensor({q}, 0.0));
  } else if (k == FusionKind::Attention) {
    add("score.weight", he_normal({1, q}, q, rng));
    add("score.bias", ad::Tensor({1}, 0.0));
  } else if (k == FusionKind::MultiHeadAttention) {
    const std::size_t hd = q / cfg_.heads;
    add("score.weight", he_normal({cfg_.heads, hd}, hd, rng));
    add("score.bias", ad::Tensor({cfg_.heads}, 0.0));
  } else if (is_cross(k)) {
    const std::size_t dt = q / cfg_.tokens;
    for (const char* name : {"query.weight", "key.weight", "value.weight", "out.weight"}) {
      add(name, he_normal({dt, dt}, dt, rng));
    }
  } else if (is_film(k)) {
    add("gamma.weight", he_normal({q, q}, q, rng));
    add("gamma.bias", ad::Tensor({q}, 1.0));
    add("beta.weight", he_normal({q, q}, q, rng));
    add("beta.bias", ad::Tensor({q}, 0.0));
  } else if (is_bilinear(k)) {
    add("core", he_normal({q, q, q}, q * q, rng));
  } else if (is_factorized(k)) {
    add("u.weight", he_normal({q, q}, q, rng));
    add("v.weight", he_normal({q, q}, q, rng));
  }
}

Var FusionLayer::extra(const std::string& key) const { return extras_.at(key); }

std::size_t FusionLayer::output_width() const {
  return cfg_.kind ? fusion::output_width(*cfg_.kind, cfg_.width) : cfg_.width;
}

Var FusionLayer::project_h(const Var& h) const { return ad::linear(h, w_h_, b_h_); }

Var FusionLayer::project_z(const Var& z) const {
  if (is_baseline()) throw InvalidArgument("baseline fusion has no D-Marker projection");
  return ad::linear(z, w_z_, b_z_);
}

Var FusionLayer::fuse(const Var& h, const Var& z) const {
  if (is_baseline()) return project_h(h);
  return combine(project_h(h), project_z(z));
}

Var FusionLayer::gate(const Var& hstar, const Var& zstar) const {
  return ad::sigmoid(
      ad::linear(ad::concat({hstar, zstar}, -1), extra("gate.weight"), extra("gate.bias")));
}

Var FusionLayer::attention_weights(const Var& hstar, const Var& zstar) const {
  const std::size_t batch = hstar.shape()[0];
  if (*cfg_.kind == FusionKind::Attention) {
    const Var w = extra("score.weight"), b = extra("score.bias");
    return ad::softmax_over_axis(
        ad::concat({ad::linear(hstar, w, b), ad::linear(zstar, w, b)}, -1), -1);
  }
  const std::size_t h = cfg_.heads, hd = cfg_.width / h;
  const Var w = extra("score.weight");
  const Var b = ad::reshape(extra("score.bias"), {h, 1});
  auto score = [&](const Var& x) {
    const Var xr = ad::reshape(x, {batch, h, hd});
    return ad::add(ad::sum_over_axis(ad::mul(xr, w), -1, true), b);
  };
  return ad::softmax_over_axis(ad::concat({score(hstar), score(zstar)}, -1), -1);
}

Var FusionLayer::weighted_sum(const Var& hstar, const Var& zstar) const {
  const Var a = attention_weights(hstar, zstar);
  if (*cfg_.kind == FusionKind::Attention) {
    return ad::add(ad::mul(ad::slice(a, -1, 0, 1), hstar),
                   ad::mul(ad::slice(a, -1, 1, 1), zstar));
  }
  const std::size_t batch = hstar.shape()[0];
  const std::size_t h = cfg_.heads, hd = cfg_.width / h;
  const Var hr = ad::reshape(hstar, {batch, h, hd});
  const Var zr = ad::reshape(zstar, {batch, h, hd});
  const Var f = ad::add(ad::mul(ad::slice(a, -1, 0, 1), hr), ad::mul(ad::slice(a, -1, 1, 1), zr));
  return ad::reshape(f, {batch, cfg_.width});
}

// Query tokens come from H*, keys and values from Z*; the attended values
// are projected and added back onto H*.
Var FusionLayer::cross_attend(const Var& hstar, const Var& zstar, std::size_t heads) const {
  const std::size_t batch = hstar.shape()[0];
  const std::size_t n = cfg_.tokens, dt = cfg_.width / n, hd = dt / heads;
  auto split_heads = [&](const Var& tokens) {
    return ad::transpose(ad::reshape(tokens, {batch, n, heads, hd}), 1, 2);
  };
  const Var ht = ad::reshape(hstar, {batch, n, dt});
  const Var zt = ad::reshape(zstar, {batch, n, dt});
  const Var q = split_heads(ad::linear(ht, extra("query.weight"), Var()));
  const Var k = split_heads(ad::linear(zt, extra("key.weight"), Var()));
  const Var v = split_heads(ad::linear(zt, extra("value.weight"), Var()));
  const Var scores =
      ad::scale(ad::matmul(q, ad::transpose(k, -1, -2)), 1.0 / std::sqrt(static_cast<double>(hd)));
  const Var ctx = ad::matmul(ad::softmax_over_axis(scores, -1), v);
  const Var merged = ad::reshape(ad::transpose(ctx, 1, 2), {batch, n, dt});
  const Var out = ad::linear(merged, extra("out.weight"), Var());
  return ad::add(hstar, ad::reshape(out, {batch, cfg_.width}));
}

Var FusionLayer::film(const Var& hstar, const Var& zstar) const {
  const Var gamma = ad::linear(zstar, extra("gamma.weight"), extra("gamma.bias"));
  const Var beta = ad::linear(zstar, extra("beta.weight"), extra("beta.bias"));
  return ad::add(ad::mul(gamma, hstar), beta);
}

Var FusionLayer::factorized(const Var& hstar, const Var& zstar) const {
  return ad::mul(ad::linear(hstar, extra("u.weight"), Var()),
                 ad::linear(zstar, extra("v.weight"), Var()));
}

Var FusionLayer::combine(const Var& hstar, const Var& zstar) const {
  if (is_baseline()) return hstar;
  if (hstar.shape() != zstar.shape() || hstar.shape().size() != 2 ||
      hstar.shape()[1] != cfg_.width) {
    throw ShapeMismatch("fusion inputs " + ad::shape_string(hstar.shape()) + " and " +
                        ad::shape_string(zstar.shape()) + ", expected [B, " +
                        std::to_string(cfg_.width) + "]");
  }
  switch (*cfg_.kind) {
    case FusionKind::Concat:
      return ad::concat({hstar, zstar}, -1);
    case FusionKind::GatedConcat: {
      const Var g = gate(hstar, zstar);
      return ad::concat({ad::mul(g, hstar), ad::mul(ad::one_minus(g), zstar)}, -1);
    }
    case FusionKind::Additive:
      return ad::add(hstar, zstar);
    case FusionKind::Hadamard:
      return ad::mul(hstar, zstar);
    case FusionKind::GatedHadamard: {
      const Var g = gate(hstar, zstar);
      return ad::add(ad::mul(g, ad::mul(hstar, zstar)), ad::mul(ad::one_minus(g), hstar));
    }
    case FusionKind::Attention:
    case FusionKind::MultiHeadAttention:
      return weighted_sum(hstar, zstar);
    case FusionKind::CrossAttention:
      return cross_attend(hstar, zstar, 1);
    case FusionKind::MultiHeadCrossAttention:
      return cross_attend(hstar, zstar, cfg_.heads);
    case FusionKind::FiLM:
      return film(hstar, zstar);
    case FusionKind::FiLMHadamard:
      return ad::mul(film(hstar, zstar), zstar);
    case FusionKind::Bilinear:
      return ad::bilinear_form(hstar, extra("core"), zstar);
    case FusionKind::BilinearHadamard:
      return ad::mul(ad::bilinear_form(hstar, extra("core"), zstar), ad::mul(hstar, zstar));
    case FusionKind::FactorizedBilinear:
      return factorized(hstar, zstar);
    case FusionKind::FactorizedHadamard:
      return ad::mul(factorized(hstar, zstar), ad::mul(hstar, zstar));
  }
  throw UnknownKind("unreachable fusion kind");
}

}  // namespace smilefusion::fusion
