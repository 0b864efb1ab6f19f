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

#ifndef SMILEFUSION_MODEL_HPP_
#define SMILEFUSION_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smilefusion/dmarker.hpp"
#include "smilefusion/fusion.hpp"
#include "smilefusion/init.hpp"
#include "smilefusion/tensor.hpp"

namespace smilefusion::model {

using ad::Var;

struct BackboneConfig {
  std::size_t input_points = 11;
  std::size_t spatial_dim = 128;  // d_s
  std::size_t output_dim = 256;   // D
  std::size_t temporal_blocks = 3;
  std::size_t heads = 4;
  double dropout = 0.1;
  std::size_t frames = 16;  // T
  std::size_t ff_mult = 2;  // feed-forward hidden width = ff_mult * d_s
  bool positional_encoding = false;

  void validate() const;

  // Published dimensions with the 16-frame implementation length.
  static BackboneConfig paper();
  // Same as paper() with the 64-frame sequence length.
  static BackboneConfig paper_long();
  // Reduced widths for desk-scale experiments.
  static BackboneConfig desk();
};

// Per-call dropout seeding: every dropout site draws the next derived seed.
struct ForwardContext {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t calls = 0;

  std::uint64_t next_seed() { return ad::splitmix64(seed ^ ad::splitmix64(++calls)); }
};

class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, ad::ParameterSet& params, Rng& rng,
           const std::string& prefix = "backbone");

  // [B, T, P, 3] or [B, T, 3P] -> [B, T, d_s]; frames are encoded independently.
  Var encode_frames(const Var& x) const;
  // [B, T, d_s] -> [B, T, d_s]. When `attention` is given, the softmax
  // weights of every block ([B, heads, T, T]) are appended to it.
  Var encode_temporal(const Var& s, ForwardContext& ctx,
                      std::vector<ad::Tensor>* attention = nullptr) const;
  // [B, T, d_s] -> [B, D]
  Var pool_project(const Var& t) const;
  Var forward(const Var& x, ForwardContext& ctx) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  struct Block {
    Var ln1_gain, ln1_bias;
    Var wq, bq, wk, bk, wv, bv, wo, bo;
    Var ln2_gain, ln2_bias;
    Var ff1_w, ff1_b, ff2_w, ff2_b;
  };

  BackboneConfig cfg_;
  Var fc1_w_, fc1_b_, fc2_w_, fc2_b_;
  Var positional_;
  std::vector<Block> blocks_;
  Var pool_w_, pool_b_;
};

// LayerNorm over the fused vector followed by a sigmoid affine readout.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t width, ad::ParameterSet& params, Rng& rng,
                 const std::string& prefix = "head");

  // [B, Q] -> [B, 1] probabilities.
  Var classify(const Var& f) const;

  Var ln_gain, ln_bias, weight, bias;
};

enum class InferenceMode { Strict, ConstantGate };

std::string_view inference_mode_name(InferenceMode m);
InferenceMode parse_inference_mode(std::string_view name);

struct ModelConfig {
  BackboneConfig backbone;
  fusion::FusionConfig fusion;
  InferenceMode inference_mode = InferenceMode::Strict;

  // Fills fusion.input_dim from the backbone and validates both parts.
  static ModelConfig make(const BackboneConfig& backbone,
                          std::optional<fusion::FusionKind> kind, std::size_t width = 128,
                          InferenceMode mode = InferenceMode::Strict);
  void validate() const;
};

nlohmann::json to_json(const BackboneConfig& c);
BackboneConfig backbone_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

std::size_t backbone_parameter_count(const BackboneConfig& c);
std::size_t head_parameter_count(std::size_t width);
// Closed-form count of backbone + fusion + head.
std::size_t expected_parameter_count(const ModelConfig& c);
// Regression head out x in plus bias and a LayerNorm over `in` (gain, bias).
std::size_t auxiliary_head_parameter_count(std::size_t in = 256, std::size_t out = 216);

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // x: [B, T, P, 3] or [B, T, 3P]; z: raw D-Markers [B, k] (standardized
  // internally with the stored statistics). Returns [B, 1] probabilities.
  Var forward(const Var& x, const Var& z, ForwardContext& ctx) const;
  // Video-only path: baseline models, or constant-gate models where Z* is the
  // stored training mean. Strict models throw UnsupportedInferenceMode.
  Var forward_inference(const Var& x, ForwardContext& ctx) const;

  // Fused vector F for a batch; `z` may be undefined for video-only modes.
  Var fused(const Var& x, const Var& z, ForwardContext& ctx) const;
  Var hstar(const Var& x, ForwardContext& ctx) const;

  bool admits_video_only() const;

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }
  const Backbone& backbone() const { return backbone_; }
  const fusion::FusionLayer& fusion() const { return fusion_; }
  const ClassifierHead& head() const { return head_; }

  // z-score statistics for the raw D-Marker inputs (identity by default).
  void set_dmarker_stats(std::vector<double> mean, std::vector<double> stddev);
  const std::vector<double>& dmarker_mean() const { return z_mean_; }
  const std::vector<double>& dmarker_std() const { return z_std_; }
  ad::Tensor standardize(std::span<const dmarker::DMarkerVector> batch) const;
  ad::Tensor standardize_tensor(const ad::Tensor& raw) const;

  // Constant-gate mode: mean of Z* over the training set.
  void set_zstar_mean(std::vector<double> mean) { zstar_mean_ = std::move(mean); }
  const std::vector<double>& zstar_mean() const { return zstar_mean_; }

 private:
  Model(const ModelConfig& cfg, Rng rng);
  Var standardize_var(const Var& z) const;

  ModelConfig cfg_;
  ad::ParameterSet params_;
  Backbone backbone_;
  fusion::FusionLayer fusion_;
  ClassifierHead head_;
  std::vector<double> z_mean_, z_std_, zstar_mean_;
};

// Writes <dir>/checkpoint.json and <dir>/model_manifest.json.
void save_model(const Model& m, const std::filesystem::path& dir);
// Reads a checkpoint and the model_manifest.json next to it.
Model load_model(const std::filesystem::path& checkpoint);
nlohmann::json model_manifest(const Model& m);

}  // namespace smilefusion::model

#endif  // SMILEFUSION_MODEL_HPP_
