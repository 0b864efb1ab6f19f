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

#include "smilefusion/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "smilefusion/error.hpp"

namespace smilefusion::training {

using ad::Tensor;
using ad::Var;

std::string_view optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::AdamW ? "adamw" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adamw") return OptimizerKind::AdamW;
  if (name == "adam") return OptimizerKind::Adam;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "' (valid: adamw, adam)");
}

double TrainConfig::resolved_weight_decay() const {
  if (weight_decay) return *weight_decay;
  return optimizer == OptimizerKind::AdamW ? 1e-2 : 0.0;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be finite and >= 0");
  if (!(lr_min >= 0.0) || lr_min > std::max(lr, 0.0)) {
    throw InvalidArgument("lr_min must lie in [0, lr]");
  }
  if (resolved_weight_decay() < 0.0) throw InvalidArgument("weight_decay must be >= 0");
}

TrainConfig TrainConfig::paper_body() {
  TrainConfig c;
  c.optimizer = OptimizerKind::Adam;
  c.lr = 1e-4;
  c.weight_decay = 0.0;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_min", c.lr_min},
          {"optimizer", std::string(optimizer_name(c.optimizer))},
          {"weight_decay", c.resolved_weight_decay()},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.optimizer = parse_optimizer(j.value("optimizer", std::string("adamw")));
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double bce_loss(double yhat, double y) {
  const double p = std::clamp(yhat, 1e-12, 1.0 - 1e-12);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

double cosine_lr(double t, double t_total, double lr_max, double lr_min) {
  if (t_total <= 0.0) return lr_max;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / t_total));
}

namespace {

void moment_update(std::span<double> w, std::span<const double> g, MomentState& s,
                   std::size_t t, double lr, double l2, double decoupled) {
  if (w.size() != g.size()) throw ShapeMismatch("adam: parameter/gradient size mismatch");
  if (t < 1) throw InvalidArgument("adam: step index starts at 1");
  if (s.m.size() != w.size()) {
    s.m.assign(w.size(), 0.0);
    s.v.assign(w.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i] + l2 * w[i];
    s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * gi;
    s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * gi * gi;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps) + lr * decoupled * w[i];
  }
}

}  // namespace

void adam_step(std::span<double> w, std::span<const double> g, MomentState& s, std::size_t t,
               double lr, double weight_decay) {
  moment_update(w, g, s, t, lr, weight_decay, 0.0);
}

void adamw_step(std::span<double> w, std::span<const double> g, MomentState& s, std::size_t t,
                double lr, double weight_decay) {
  moment_update(w, g, s, t, lr, 0.0, weight_decay);
}

void Optimizer::step(ad::ParameterSet& params, double lr) {
  auto& items = params.items();
  if (state_.size() != items.size()) state_.resize(items.size());
  ++t_;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].trainable) continue;
    Var& v = items[i].var;
    Tensor& grad = v.mutable_grad();
    if (grad.size() != v.value().size()) grad = Tensor(v.value().shape(), 0.0);
    if (kind_ == OptimizerKind::AdamW) {
      adamw_step(v.mutable_value().data(), grad.data(), state_[i], t_, lr, weight_decay_);
    } else {
      adam_step(v.mutable_value().data(), grad.data(), state_[i], t_, lr, weight_decay_);
    }
  }
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,lr,train_loss,train_acc\n";
  out.precision(17);
  for (const auto& r : epochs) {
    out << r.epoch << ',' << r.lr << ',' << r.loss << ',' << r.accuracy << '\n';
  }
}

std::pair<std::vector<double>, std::vector<double>> dmarker_statistics(const Dataset& data) {
  if (data.empty()) throw InvalidArgument("D-Marker statistics need at least one sample");
  const std::size_t k = data.front().dmarker.size();
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (const auto& s : data) {
    if (s.dmarker.size() != k) throw ShapeMismatch("inconsistent D-Marker lengths");
    for (std::size_t j = 0; j < k; ++j) mean[j] += s.dmarker[j];
  }
  const double n = static_cast<double>(data.size());
  for (double& m : mean) m /= n;
  for (const auto& s : data) {
    for (std::size_t j = 0; j < k; ++j) sd[j] += (s.dmarker[j] - mean[j]) * (s.dmarker[j] - mean[j]);
  }
  for (double& v : sd) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return {std::move(mean), std::move(sd)};
}

Tensor batch_frames(const Dataset& data, std::span<const std::size_t> idx) {
  if (idx.empty()) throw InvalidArgument("empty batch");
  const Tensor& first = data.at(idx[0]).frames;
  ad::Shape shape{idx.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const std::size_t n = first.size();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor& f = data.at(idx[b]).frames;
    if (f.shape() != first.shape()) {
      throw ShapeMismatch("sample " + data[idx[b]].id + " frames " + ad::shape_string(f.shape()) +
                          " vs " + ad::shape_string(first.shape()));
    }
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + b * n);
  }
  return out;
}

Tensor batch_dmarkers(const Dataset& data, std::span<const std::size_t> idx) {
  const std::size_t k = data.at(idx[0]).dmarker.size();
  Tensor out({idx.size(), k});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& z = data.at(idx[b]).dmarker;
    if (z.size() != k) throw ShapeMismatch("inconsistent D-Marker lengths");
    std::copy(z.begin(), z.end(), out.data().begin() + b * k);
  }
  return out;
}

namespace {

void require_both_labels(const Dataset& data) {
  bool pos = false, neg = false;
  for (const auto& s : data) {
    if (s.label == 1) pos = true;
    else if (s.label == 0) neg = true;
    else throw InvalidArgument("label of " + s.id + " is not 0 or 1");
  }
  if (!pos || !neg) {
    throw EmptyClass(std::string("training data has no ") + (pos ? "posed (0)" : "genuine (1)") +
                     " samples");
  }
}

std::vector<double> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<double> y;
  y.reserve(idx.size());
  for (std::size_t i : idx) y.push_back(static_cast<double>(data[i].label));
  return y;
}

}  // namespace

void fit_zstar_mean(model::Model& m, const Dataset& data) {
  if (m.fusion().is_baseline()) return;
  const std::size_t q = m.config().fusion.width;
  std::vector<double> mean(q, 0.0);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Var z = ad::constant(m.standardize_tensor(batch_dmarkers(data, idx)));
  const Tensor zs = m.fusion().project_z(z).value();
  for (std::size_t i = 0; i < zs.size(); ++i) mean[i % q] += zs[i];
  for (double& v : mean) v /= static_cast<double>(data.size());
  m.set_zstar_mean(std::move(mean));
}

TrainLog train(model::Model& m, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("training data is empty");
  require_both_labels(data);
  auto [mean, sd] = dmarker_statistics(data);
  if (!m.fusion().is_baseline()) m.set_dmarker_stats(std::move(mean), std::move(sd));

  Optimizer opt(cfg.optimizer, cfg.resolved_weight_decay());
  TrainLog log;
  std::vector<std::size_t> order(data.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(static_cast<double>(epoch), static_cast<double>(cfg.epochs),
                                cfg.lr, cfg.lr_min);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(ad::splitmix64(cfg.seed ^ ad::splitmix64(epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, len);
      const std::vector<double> y = labels_of(data, idx);
      model::ForwardContext ctx{true, ad::splitmix64(cfg.seed + 0x5eed0000ULL + step++), 0};
      Var x = ad::constant(batch_frames(data, idx));
      Var z = m.fusion().is_baseline() ? Var() : ad::constant(batch_dmarkers(data, idx));
      Var prob = m.forward(x, z, ctx);
      Var loss = ad::bce_mean(prob, y);
      m.parameters().zero_grad();
      ad::backward(loss);
      opt.step(m.parameters(), lr);
      loss_sum += loss.value().item() * static_cast<double>(len);
      for (std::size_t b = 0; b < len; ++b) {
        if ((prob.value()[b] >= 0.5) == (y[b] >= 0.5)) ++correct;
      }
    }
    const double n = static_cast<double>(data.size());
    log.epochs.push_back({epoch + 1, lr, loss_sum / n, static_cast<double>(correct) / n});
  }
  if (m.config().inference_mode == model::InferenceMode::ConstantGate) fit_zstar_mean(m, data);
  return log;
}

EvalResult evaluate(const model::Model& m, const Dataset& data,
                    std::optional<bool> use_dmarkers, std::size_t batch_size) {
  if (data.empty()) throw InvalidArgument("evaluation data is empty");
  EvalResult r;
  const bool with_z =
      !m.fusion().is_baseline() && use_dmarkers.value_or(!m.admits_video_only());
  r.video_only = !with_z;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, idx.size() - start);
    std::span<const std::size_t> b(idx.data() + start, len);
    model::ForwardContext ctx;
    Var x = ad::constant(batch_frames(data, b));
    Var prob = with_z ? m.forward(x, ad::constant(batch_dmarkers(data, b)), ctx)
                      : m.forward_inference(x, ctx);
    for (std::size_t i = 0; i < len; ++i) {
      const double p = prob.value()[i];
      const int y = data[b[i]].label;
      r.probabilities.push_back(p);
      loss += bce_loss(p, y);
      if ((p >= 0.5) == (y == 1)) ++correct;
    }
  }
  const double n = static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.loss = loss / n;
  return r;
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t FoldPlan::hash() const {
  std::uint64_t h = ad::splitmix64(folds.size());
  auto mix = [&h](std::uint64_t v) { h = ad::splitmix64(h ^ v); };
  for (const Fold& f : folds) {
    for (const auto& s : f.train_subjects) mix(hash_string(s));
    mix(0x7e57);
    for (const auto& s : f.test_subjects) mix(hash_string(s));
    for (std::size_t i : f.train_indices) mix(i);
    mix(0x7e58);
    for (std::size_t i : f.test_indices) mix(i);
  }
  return h;
}

void FoldPlan::check(std::span<const std::string> subjects) const {
  std::vector<int> tested(subjects.size(), 0);
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    const Fold& f = folds[fi];
    std::set<std::string> test(f.test_subjects.begin(), f.test_subjects.end());
    for (const auto& s : f.train_subjects) {
      if (test.count(s)) {
        throw InvalidArgument("fold " + std::to_string(fi) + ": subject " + s +
                              " in both train and test");
      }
    }
    for (std::size_t i : f.train_indices) {
      if (test.count(subjects[i])) {
        throw InvalidArgument("fold " + std::to_string(fi) + ": training video " +
                              std::to_string(i) + " belongs to a test subject");
      }
    }
    for (std::size_t i : f.test_indices) {
      if (!test.count(subjects[i])) {
        throw InvalidArgument("fold " + std::to_string(fi) + ": test video " + std::to_string(i) +
                              " belongs to a training subject");
      }
      ++tested.at(i);
    }
  }
  for (std::size_t i = 0; i < tested.size(); ++i) {
    if (tested[i] != 1) {
      throw InvalidArgument("video " + std::to_string(i) + " tested " +
                            std::to_string(tested[i]) + " times");
    }
  }
}

FoldPlan make_fold_plan(std::span<const std::string> subjects, std::size_t n_folds,
                        std::uint64_t seed) {
  std::vector<std::string> unique(subjects.begin(), subjects.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (n_folds < 2) throw InvalidArgument("crossval needs at least 2 folds");
  if (n_folds > unique.size()) {
    throw TooFewSubjects(std::to_string(n_folds) + " folds requested but only " +
                         std::to_string(unique.size()) + " subjects");
  }
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (auto& s : unique) keyed.emplace_back(ad::splitmix64(seed ^ hash_string(s)), s);
  std::sort(keyed.begin(), keyed.end());
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < keyed.size(); ++i) fold_of[keyed[i].second] = i % n_folds;

  FoldPlan plan;
  plan.folds.resize(n_folds);
  for (const auto& [s, f] : fold_of) {
    for (std::size_t g = 0; g < n_folds; ++g) {
      (g == f ? plan.folds[g].test_subjects : plan.folds[g].train_subjects).push_back(s);
    }
  }
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::size_t f = fold_of.at(subjects[i]);
    for (std::size_t g = 0; g < n_folds; ++g) {
      (g == f ? plan.folds[g].test_indices : plan.folds[g].train_indices).push_back(i);
    }
  }
  plan.check(subjects);
  return plan;
}

namespace {
std::vector<std::string> subjects_of(const Dataset& data) {
  std::vector<std::string> s;
  s.reserve(data.size());
  for (const auto& d : data) s.push_back(d.subject_id);
  return s;
}
}  // namespace

FoldPlan make_fold_plan(const Dataset& data, std::size_t n_folds, std::uint64_t seed) {
  return make_fold_plan(subjects_of(data), n_folds, seed);
}

Dataset subset(const Dataset& data, std::span<const std::size_t> idx) {
  Dataset out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.at(i));
  return out;
}

CrossvalResult crossval(const Dataset& data, const model::ModelConfig& mcfg,
                        const TrainConfig& tcfg, std::size_t n_folds, const FoldPlan* plan) {
  mcfg.validate();
  tcfg.validate();
  CrossvalResult r;
  r.plan = plan ? *plan : make_fold_plan(data, n_folds, tcfg.seed);
  const auto subjects = subjects_of(data);
  r.plan.check(subjects);

  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t f = 0; f < r.plan.folds.size(); ++f) {
    const Fold& fold = r.plan.folds[f];
    const Dataset train_set = subset(data, fold.train_indices);
    const Dataset test_set = subset(data, fold.test_indices);
    TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = ad::splitmix64(tcfg.seed ^ ad::splitmix64(0xf01d + f));
    model::Model m(mcfg, fold_cfg.seed);
    r.logs.push_back(train(m, train_set, fold_cfg));
    const EvalResult e = evaluate(m, test_set);
    r.metrics.fold_accuracies.push_back(e.accuracy);
    correct += static_cast<std::size_t>(std::lround(e.accuracy * static_cast<double>(test_set.size())));
    loss += e.loss * static_cast<double>(test_set.size());
  }
  const double n = static_cast<double>(data.size());
  const auto& acc = r.metrics.fold_accuracies;
  r.metrics.accuracy = static_cast<double>(correct) / n;
  r.metrics.loss = loss / n;
  r.metrics.mean_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  double var = 0.0;
  for (double a : acc) var += (a - r.metrics.mean_accuracy) * (a - r.metrics.mean_accuracy);
  r.metrics.std_accuracy = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
  return r;
}

nlohmann::json crossval_report(const CrossvalResult& r, const nlohmann::json& config) {
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t f = 0; f < r.plan.folds.size(); ++f) {
    folds.push_back({{"train_subjects", r.plan.folds[f].train_subjects},
                     {"test_subjects", r.plan.folds[f].test_subjects},
                     {"accuracy", r.metrics.fold_accuracies.at(f)}});
  }
  return {{"config", config},
          {"folds", folds},
          {"mean_accuracy", r.metrics.mean_accuracy},
          {"std_accuracy", r.metrics.std_accuracy},
          {"pooled_accuracy", r.metrics.accuracy},
          {"fold_plan_hash", r.plan.hash()}};
}

}  // namespace smilefusion::training
