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

#ifndef SMILEFUSION_TRAINING_HPP_
#define SMILEFUSION_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smilefusion/dmarker.hpp"
#include "smilefusion/model.hpp"
#include "smilefusion/tensor.hpp"

namespace smilefusion::training {

enum class OptimizerKind { AdamW, Adam };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  double lr = 5e-4;
  double lr_min = 0.0;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  // Unset means 1e-2 for AdamW and 0 for Adam.
  std::optional<double> weight_decay;
  std::uint64_t seed = 0;

  double resolved_weight_decay() const;
  void validate() const;

  // Adam at 1e-4 without weight decay.
  static TrainConfig paper_body();
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// One video ready for the model: fixed-length frames [T, P, 3], its raw
// D-Marker vector and label.
struct Sample {
  std::string id;
  std::string subject_id;
  int label = 0;
  ad::Tensor frames;
  dmarker::DMarkerVector dmarker;
};

using Dataset = std::vector<Sample>;

double bce_loss(double yhat, double y);
double cosine_lr(double t, double t_total, double lr_max, double lr_min);

struct MomentState {
  std::vector<double> m, v;
};

inline constexpr double kBeta1 = 0.9;
inline constexpr double kBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Bias-corrected Adam update at step t >= 1. Adam folds weight decay into the
// gradient; AdamW subtracts lr * weight_decay * w separately.
void adam_step(std::span<double> w, std::span<const double> g, MomentState& s, std::size_t t,
               double lr, double weight_decay);
void adamw_step(std::span<double> w, std::span<const double> g, MomentState& s, std::size_t t,
                double lr, double weight_decay);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double weight_decay) : kind_(kind), weight_decay_(weight_decay) {}

  // Applies one update from the current gradients of the trainable parameters.
  void step(ad::ParameterSet& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double weight_decay_;
  std::size_t t_ = 0;
  std::vector<MomentState> state_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  void write_csv(std::ostream& out) const;
};

// Per-dimension mean and population std of the D-Marker vectors.
std::pair<std::vector<double>, std::vector<double>> dmarker_statistics(const Dataset& data);

ad::Tensor batch_frames(const Dataset& data, std::span<const std::size_t> idx);
ad::Tensor batch_dmarkers(const Dataset& data, std::span<const std::size_t> idx);

// Fits D-Marker statistics on `data`, then minimizes mean BCE with shuffled
// mini-batches. Constant-gate models also get their Z* mean stored.
TrainLog train(model::Model& m, const Dataset& data, const TrainConfig& cfg);

// Recomputes the stored Z* mean from `data` in evaluation mode.
void fit_zstar_mean(model::Model& m, const Dataset& data);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<double> probabilities;
  bool video_only = false;
};

// Scores `data` in evaluation mode. Models that admit video-only inference
// are scored without D-Markers unless `use_dmarkers` forces otherwise.
EvalResult evaluate(const model::Model& m, const Dataset& data,
                    std::optional<bool> use_dmarkers = std::nullopt,
                    std::size_t batch_size = 64);

struct Fold {
  std::vector<std::string> train_subjects, test_subjects;
  std::vector<std::size_t> train_indices, test_indices;
};

struct FoldPlan {
  std::vector<Fold> folds;

  // Order-sensitive digest of subject assignments and indices.
  std::uint64_t hash() const;
  // Throws InvalidArgument when a subject crosses train/test or a video is not
  // tested exactly once.
  void check(std::span<const std::string> subjects) const;
};

// Round-robin over subjects ordered by a seeded hash of their id.
FoldPlan make_fold_plan(std::span<const std::string> subjects, std::size_t n_folds,
                        std::uint64_t seed);
FoldPlan make_fold_plan(const Dataset& data, std::size_t n_folds, std::uint64_t seed);

struct Metrics {
  double accuracy = 0.0;  // pooled over all test videos
  double loss = 0.0;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

struct CrossvalResult {
  FoldPlan plan;
  Metrics metrics;
  std::vector<TrainLog> logs;
};

Dataset subset(const Dataset& data, std::span<const std::size_t> idx);

CrossvalResult crossval(const Dataset& data, const model::ModelConfig& mcfg,
                        const TrainConfig& tcfg, std::size_t n_folds,
                        const FoldPlan* plan = nullptr);

nlohmann::json crossval_report(const CrossvalResult& r, const nlohmann::json& config);

std::uint64_t hash_string(std::string_view s);

}  // namespace smilefusion::training

#endif  // SMILEFUSION_TRAINING_HPP_
