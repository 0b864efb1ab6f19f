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

#ifndef SMILEFUSION_FUSION_HPP_
#define SMILEFUSION_FUSION_HPP_

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "smilefusion/init.hpp"
#include "smilefusion/tensor.hpp"

namespace smilefusion::fusion {

using ad::Var;

enum class FusionKind {
  Concat,
  GatedConcat,
  Additive,
  Hadamard,
  GatedHadamard,
  Attention,
  MultiHeadAttention,
  CrossAttention,
  MultiHeadCrossAttention,
  FiLM,
  FiLMHadamard,
  Bilinear,
  BilinearHadamard,
  FactorizedBilinear,
  FactorizedHadamard,
};

inline constexpr std::size_t kFusionKindCount = 15;

const std::array<FusionKind, kFusionKindCount>& all_fusion_kinds();
std::string_view fusion_name(FusionKind kind);
// Accepts the kebab-case names; throws UnknownKind listing all valid names.
FusionKind parse_fusion_kind(std::string_view name);
std::string fusion_name_list();

std::size_t output_width(FusionKind kind, std::size_t q);

struct FusionConfig {
  // Empty means the no-fusion baseline: F = W_H H + b_H and no D-Marker path.
  std::optional<FusionKind> kind = FusionKind::Hadamard;
  std::size_t input_dim = 256;    // D
  std::size_t dmarker_dim = 225;  // k
  std::size_t width = 128;        // Q
  std::size_t heads = 4;          // multi-head attention / cross-attention
  std::size_t tokens = 4;         // cross-attention splits Q into tokens

  void validate() const;
};

// Closed-form parameter count of the kind-specific weights (0 for the
// parameter-free kinds and the baseline).
std::size_t extra_parameter_count(const FusionConfig& cfg);
std::size_t projection_parameter_count(const FusionConfig& cfg);

class FusionLayer {
 public:
  FusionLayer(const FusionConfig& cfg, ad::ParameterSet& params, Rng& rng,
              const std::string& prefix = "fusion");

  // Inputs are batched: H [B, D], Z [B, k]; outputs [B, Q].
  Var project_h(const Var& h) const;
  Var project_z(const Var& z) const;
  // Fuses already-projected vectors.
  Var combine(const Var& hstar, const Var& zstar) const;
  Var fuse(const Var& h, const Var& z) const;

  // Sigmoid gate of the gated kinds, [B, Q].
  Var gate(const Var& hstar, const Var& zstar) const;
  // Softmax weights of the attention kinds: [B, 2] or [B, heads, 2].
  Var attention_weights(const Var& hstar, const Var& zstar) const;

  const FusionConfig& config() const { return cfg_; }
  bool is_baseline() const { return !cfg_.kind.has_value(); }
  std::size_t output_width() const;

 private:
  Var extra(const std::string& key) const;
  Var cross_attend(const Var& hstar, const Var& zstar, std::size_t heads) const;
  Var weighted_sum(const Var& hstar, const Var& zstar) const;
  Var film(const Var& hstar, const Var& zstar) const;
  Var factorized(const Var& hstar, const Var& zstar) const;

  FusionConfig cfg_;
  Var w_h_, b_h_, w_z_, b_z_;
  std::map<std::string, Var> extras_;
};

}  // namespace smilefusion::fusion

#endif  // SMILEFUSION_FUSION_HPP_
