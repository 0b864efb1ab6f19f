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

#include "smilefusion/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smilefusion/data.hpp"
#include "smilefusion/error.hpp"
#include "smilefusion/fusion.hpp"
#include "smilefusion/grad_suite.hpp"
#include "smilefusion/model.hpp"
#include "smilefusion/training.hpp"

namespace smilefusion::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Kind { UInt, Real, Str, Bool };

// Flags of one subcommand, resolved as: explicit flag > --config file > default.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file with flag values");
    add("seed", Kind::UInt, nullptr, "Seed (falls back to SMILEFUSION_SEED, then 0)");
  }

  void add(const std::string& name, Kind kind, json def, const std::string& help) {
    specs_[name] = {kind, std::move(def)};
    if (kind == Kind::Bool) {
      app_->add_flag("--" + name, flags_[name], help);
    } else {
      app_->add_option("--" + name, raw_[name], help);
    }
  }

  CLI::App* app() const { return app_; }

  json resolve() const {
    json r;
    for (const auto& [name, spec] : specs_) r[name] = spec.def;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw InvalidArgument("cannot open config " + config_path_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw ParseError("config " + config_path_ + ": " + e.what());
      }
      if (!file.is_object()) throw ParseError("config " + config_path_ + " must be an object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        std::string key = it.key();
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "command") {
          if (it.value() != app_->get_name()) {
            throw InvalidArgument("config was written for '" + it.value().dump() + "', not " +
                                  app_->get_name());
          }
          continue;
        }
        const auto spec = specs_.find(key);
        if (spec == specs_.end()) throw InvalidArgument("unknown config key '" + it.key() + "'");
        r[key] = check_type(key, spec->second.kind, it.value());
      }
    }
    for (const auto& [name, spec] : specs_) {
      if (app_->count("--" + name) == 0) continue;
      if (spec.kind == Kind::Bool) {
        r[name] = flags_.at(name);
      } else {
        r[name] = convert(name, spec.kind, raw_.at(name));
      }
    }
    if (r["seed"].is_null()) {
      const char* env = std::getenv("SMILEFUSION_SEED");
      r["seed"] = env && *env ? convert("seed", Kind::UInt, env) : json(0);
    }
    r["command"] = app_->get_name();
    return r;
  }

 private:
  struct Spec {
    Kind kind;
    json def;
  };

  static json convert(const std::string& name, Kind kind, const std::string& text) {
    try {
      std::size_t used = 0;
      switch (kind) {
        case Kind::UInt: {
          if (text.empty() || text[0] == '-') throw std::invalid_argument("sign");
          const unsigned long long v = std::stoull(text, &used);
          if (used != text.size()) throw std::invalid_argument("trailing");
          return json(static_cast<std::uint64_t>(v));
        }
        case Kind::Real: {
          const double v = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument("trailing");
          return json(v);
        }
        case Kind::Str: return json(text);
        case Kind::Bool: return json(text == "true" || text == "1");
      }
    } catch (const std::logic_error&) {
    }
    throw InvalidArgument("--" + name + ": cannot parse '" + text + "'");
  }

  static json check_type(const std::string& name, Kind kind, const json& v) {
    const bool ok = v.is_null() || (kind == Kind::UInt && v.is_number_unsigned()) ||
                    (kind == Kind::Real && v.is_number()) || (kind == Kind::Str && v.is_string()) ||
                    (kind == Kind::Bool && v.is_boolean());
    if (!ok) throw InvalidArgument("config key '" + name + "' has the wrong type");
    return v;
  }

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Spec> specs_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, bool> flags_;
};

std::size_t as_size(const json& v) { return v.get<std::size_t>(); }

fs::path require_path(const json& cfg, const std::string& key) {
  if (!cfg[key].is_string() || cfg[key].get<std::string>().empty()) {
    throw InvalidArgument("--" + key + " is required");
  }
  return cfg[key].get<std::string>();
}

fs::path prepare_out(const json& cfg) {
  const fs::path dir = require_path(cfg, "out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

void echo_config(const fs::path& dir, const json& cfg) {
  write_json(dir / "resolved_config.json", cfg);
}

// Config as embedded in reports: output locations do not change results.
json report_config(json cfg) {
  cfg.erase("out");
  cfg.erase("config");
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// ---- shared model/training flags ---------------------------------------------

void add_model_flags(FlagSet& f) {
  f.add("preset", Kind::Str, "paper", "Backbone preset: paper, paper-long, desk");
  f.add("fusion", Kind::Str, "hadamard", "Fusion kind, or none for the video-only baseline");
  f.add("width", Kind::UInt, nullptr, "Projection width Q (preset default)");
  f.add("frames", Kind::UInt, nullptr, "Sequence length T (preset default)");
  f.add("dropout", Kind::Real, nullptr, "Dropout rate (preset default)");
  f.add("inference-mode", Kind::Str, "strict", "strict or constant-gate");
  f.add("smooth", Kind::Bool, false, "Smooth D-Marker signals before segmentation");
}

void add_train_flags(FlagSet& f) {
  f.add("epochs", Kind::UInt, 300, "Training epochs");
  f.add("batch-size", Kind::UInt, 16, "Mini-batch size");
  f.add("lr", Kind::Real, nullptr, "Initial learning rate (5e-4, or 1e-4 for paper-body)");
  f.add("lr-min", Kind::Real, 0.0, "Final cosine learning rate");
  f.add("optimizer", Kind::Str, "adamw", "adamw, adam or paper-body");
  f.add("weight-decay", Kind::Real, nullptr, "Weight decay (1e-2 for adamw, 0 for adam)");
}

model::ModelConfig model_config(const json& cfg) {
  const std::string preset = cfg["preset"];
  model::BackboneConfig b;
  std::size_t width = 128;
  if (preset == "paper") {
    b = model::BackboneConfig::paper();
  } else if (preset == "paper-long") {
    b = model::BackboneConfig::paper_long();
  } else if (preset == "desk") {
    b = model::BackboneConfig::desk();
    width = 32;
  } else {
    throw InvalidArgument("unknown preset '" + preset + "' (valid: paper, paper-long, desk)");
  }
  if (!cfg["frames"].is_null()) b.frames = as_size(cfg["frames"]);
  if (!cfg["dropout"].is_null()) b.dropout = cfg["dropout"].get<double>();
  if (!cfg["width"].is_null()) width = as_size(cfg["width"]);
  const std::string kind = cfg["fusion"];
  std::optional<fusion::FusionKind> k;
  if (kind != "none") k = fusion::parse_fusion_kind(kind);
  return model::ModelConfig::make(b, k, width,
                                  model::parse_inference_mode(cfg["inference-mode"].get<std::string>()));
}

training::TrainConfig train_config(const json& cfg) {
  training::TrainConfig t;
  const std::string opt = cfg["optimizer"];
  if (opt == "paper-body") {
    t = training::TrainConfig::paper_body();
  } else {
    t.optimizer = training::parse_optimizer(opt);
  }
  t.epochs = as_size(cfg["epochs"]);
  t.batch_size = as_size(cfg["batch-size"]);
  if (!cfg["lr"].is_null()) t.lr = cfg["lr"].get<double>();
  t.lr_min = cfg["lr-min"].get<double>();
  if (!cfg["weight-decay"].is_null()) t.weight_decay = cfg["weight-decay"].get<double>();
  t.seed = cfg["seed"].get<std::uint64_t>();
  t.validate();
  return t;
}

data::SampleOptions sample_options(std::size_t frames, bool smooth) {
  data::SampleOptions o;
  o.frames = frames;
  o.extract.smooth = smooth;
  return o;
}

training::Dataset load_dataset(const json& cfg, const data::SampleOptions& opt) {
  const data::Manifest m = data::load_manifest(require_path(cfg, "manifest"));
  return data::build_dataset(m, opt);
}

std::uint64_t model_seed(std::uint64_t seed) { return ad::splitmix64(seed ^ 0x6d0de1ULL); }

// ---- commands ------------------------------------------------------------------

int cmd_synth(const json& cfg, std::ostream& out) {
  data::SyntheticConfig sc;
  sc.n_videos = as_size(cfg["n"]);
  sc.n_subjects = cfg["subjects"].is_null() ? std::max<std::size_t>(1, sc.n_videos / 4)
                                            : as_size(cfg["subjects"]);
  sc.fps = cfg["fps"].get<double>();
  sc.noise_std = cfg["noise"].get<double>();
  sc.genuine_fraction = cfg["genuine-frac"].get<double>();
  sc.full_mesh = cfg["full-mesh"].get<bool>();
  sc.seed = cfg["seed"].get<std::uint64_t>();
  sc.validate();
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const data::Manifest m = data::synth_write(sc, dir);
  write_json(dir / "synthetic_config.json", data::to_json(sc));
  out << "wrote " << m.rows.size() << " videos to " << (dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

std::array<bool, 3> parse_masks(const std::string& list, const std::array<std::string, 3>& names,
                                const std::string& flag) {
  std::array<bool, 3> mask{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto it = std::find(names.begin(), names.end(), item);
    if (it == names.end()) throw InvalidArgument("--" + flag + ": unknown entry '" + item + "'");
    mask[static_cast<std::size_t>(it - names.begin())] = true;
  }
  return mask;
}

int cmd_extract(const json& cfg, std::ostream& out, std::ostream& err) {
  dmarker::ExtractOptions opt;
  opt.smooth = cfg["smooth"].get<bool>();
  opt.drop_group = parse_masks(cfg["drop-group"], {"duration", "position", "motion"}, "drop-group");
  opt.drop_region = parse_masks(cfg["drop-region"], {"lip", "eye", "cheek"}, "drop-region");
  const data::Manifest m = data::load_manifest(require_path(cfg, "manifest"));
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);

  std::ostringstream csv;
  csv.precision(17);
  csv << "subject_id,label";
  for (const auto& n : dmarker::dmarker_feature_names()) csv << ',' << n;
  csv << '\n';
  std::vector<data::BuildFailure> failures;
  for (const auto& row : m.rows) {
    try {
      auto seq = data::load_landmark_file(m.resolve(row));
      seq.fps = row.fps;
      const auto z = dmarker::extract_dmarker(seq, opt);
      csv << row.subject_id << ',' << row.label;
      for (double v : z) csv << ',' << v;
      csv << '\n';
    } catch (const Error& e) {
      failures.push_back({row.path, e.what()});
    }
  }
  write_file(dir / "dmarkers.csv", csv.str());
  std::ostringstream fail;
  fail << "path,reason\n";
  for (const auto& f : failures) {
    fail << f.path << ",\"" << f.reason << "\"\n";
    err << "extract failed: " << f.path << ": " << f.reason << '\n';
  }
  write_file(dir / "failures.csv", fail.str());
  out << "extracted " << (m.rows.size() - failures.size()) << " of " << m.rows.size()
      << " videos to " << (dir / "dmarkers.csv").string() << '\n';
  return failures.empty() ? kExitOk : kExitRuntime;
}

int cmd_train(const json& cfg, std::ostream& out) {
  const auto mcfg = model_config(cfg);
  const auto tcfg = train_config(cfg);
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const auto ds = load_dataset(cfg, sample_options(mcfg.backbone.frames, cfg["smooth"]));
  model::Model m(mcfg, model_seed(tcfg.seed));
  const auto log = training::train(m, ds, tcfg);
  model::save_model(m, dir);
  std::ostringstream csv;
  log.write_csv(csv);
  write_file(dir / "train_log.csv", csv.str());

  const auto with_z = training::evaluate(m, ds, true);
  json report = {{"config", report_config(cfg)},
                 {"parameter_count", m.parameters().count()},
                 {"fusion_extra_parameters", fusion::extra_parameter_count(mcfg.fusion)},
                 {"final_loss", log.epochs.back().loss},
                 {"train_accuracy", with_z.accuracy}};
  if (m.admits_video_only()) report["video_only_train_accuracy"] = training::evaluate(m, ds).accuracy;
  write_json(dir / "report.json", report);
  out << "trained " << ds.size() << " videos, train accuracy " << with_z.accuracy << ", checkpoint "
      << (dir / "checkpoint.json").string() << '\n';
  return kExitOk;
}

int cmd_eval(const json& cfg, std::ostream& out) {
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const model::Model m = model::load_model(require_path(cfg, "checkpoint"));
  const auto ds = load_dataset(cfg, sample_options(m.config().backbone.frames, cfg["smooth"]));
  const auto r = training::evaluate(m, ds);
  std::ostringstream csv;
  csv << "id,label,probability\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    csv << ds[i].id << ',' << ds[i].label << ',' << fmt(r.probabilities[i]) << '\n';
  }
  write_file(dir / "predictions.csv", csv.str());
  write_json(dir / "report.json", {{"config", report_config(cfg)},
                                   {"accuracy", r.accuracy},
                                   {"loss", r.loss},
                                   {"video_only", r.video_only},
                                   {"videos", ds.size()}});
  out << "accuracy " << r.accuracy << (r.video_only ? " (video only)" : " (with D-Markers)") << '\n';
  return kExitOk;
}

int cmd_crossval(const json& cfg, std::ostream& out) {
  const auto mcfg = model_config(cfg);
  const auto tcfg = train_config(cfg);
  const std::size_t folds = as_size(cfg["folds"]);
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const auto ds = load_dataset(cfg, sample_options(mcfg.backbone.frames, cfg["smooth"]));
  const auto r = training::crossval(ds, mcfg, tcfg, folds);
  write_json(dir / "crossval.json", training::crossval_report(r, report_config(cfg)));
  for (std::size_t f = 0; f < r.logs.size(); ++f) {
    std::ostringstream csv;
    r.logs[f].write_csv(csv);
    write_file(dir / ("fold_" + std::to_string(f) + "_log.csv"), csv.str());
  }
  out << "mean accuracy " << r.metrics.mean_accuracy << " over " << folds << " folds\n";
  return kExitOk;
}

int cmd_fusion_bench(const json& cfg, std::ostream& out) {
  const auto base_cfg = model_config(cfg);
  const auto tcfg = train_config(cfg);
  const std::size_t folds = as_size(cfg["folds"]);
  const std::size_t seeds = as_size(cfg["seeds"]);
  if (seeds < 1) throw InvalidArgument("--seeds must be at least 1");
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const auto ds = load_dataset(cfg, sample_options(base_cfg.backbone.frames, cfg["smooth"]));
  const auto plan = training::make_fold_plan(ds, folds, tcfg.seed);

  std::vector<std::optional<fusion::FusionKind>> kinds;
  for (auto k : fusion::all_fusion_kinds()) kinds.emplace_back(k);
  if (cfg["include-baseline"].get<bool>()) kinds.emplace_back(std::nullopt);

  std::ostringstream csv;
  csv << "kind,mean_accuracy,std_accuracy,extra_parameters,total_parameters\n";
  json rows = json::array();
  for (const auto& kind : kinds) {
    model::ModelConfig mcfg = base_cfg;
    mcfg.fusion.kind = kind;
    mcfg.validate();
    std::vector<double> acc;
    json per_seed = json::array();
    for (std::size_t s = 0; s < seeds; ++s) {
      training::TrainConfig t = tcfg;
      t.seed = tcfg.seed + s;
      const auto r = training::crossval(ds, mcfg, t, folds, &plan);
      acc.insert(acc.end(), r.metrics.fold_accuracies.begin(), r.metrics.fold_accuracies.end());
      per_seed.push_back({{"seed", t.seed},
                          {"mean_accuracy", r.metrics.mean_accuracy},
                          {"fold_accuracies", r.metrics.fold_accuracies},
                          {"fold_plan_hash", r.plan.hash()}});
    }
    double mean = 0.0, var = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    for (double a : acc) var += (a - mean) * (a - mean);
    const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
    const std::string name = kind ? std::string(fusion::fusion_name(*kind)) : "none";
    const std::size_t extra = fusion::extra_parameter_count(mcfg.fusion);
    const std::size_t total = model::expected_parameter_count(mcfg);
    if (kind) csv << name << ',' << fmt(mean) << ',' << fmt(sd) << ',' << extra << ',' << total << '\n';
    rows.push_back({{"kind", name},
                    {"mean_accuracy", mean},
                    {"std_accuracy", sd},
                    {"extra_parameters", extra},
                    {"total_parameters", total},
                    {"runs", per_seed}});
    out << name << ' ' << mean << " +- " << sd << '\n';
  }
  write_file(dir / "fusion_bench.csv", csv.str());
  write_json(dir / "fusion_bench.json", {{"config", report_config(cfg)},
                                         {"fold_plan_hash", plan.hash()},
                                         {"kinds", rows}});
  return kExitOk;
}

int cmd_grad_check(const json& cfg, std::ostream& out) {
  GradSuiteOptions opt;
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  opt.seeds.clear();
  for (std::uint64_t s = 1; s <= 5; ++s) opt.seeds.push_back(seed * 5 + s);
  opt.inject_fault = cfg["inject-fault"].get<bool>();
  const auto targets = run_grad_suite(opt);
  bool ok = true;
  std::ostringstream csv;
  csv << "group,target,max_rel_error,entries,status\n";
  for (const auto& t : targets) {
    ok = ok && t.passed();
    const char* status = t.passed() ? "PASS" : "FAIL";
    out << status << ' ' << t.group << ' ' << t.name << " max_rel_error=" << t.max_rel_error << '\n';
    csv << t.group << ',' << t.name << ',' << fmt(t.max_rel_error) << ',' << t.entries << ','
        << status << '\n';
  }
  if (cfg["out"].is_string() && !cfg["out"].get<std::string>().empty()) {
    const fs::path dir = prepare_out(cfg);
    echo_config(dir, cfg);
    write_file(dir / "grad_check.csv", csv.str());
  }
  return ok ? kExitOk : kExitRuntime;
}

int cmd_export(const json& cfg, std::ostream& out) {
  const fs::path dir = prepare_out(cfg);
  echo_config(dir, cfg);
  const model::Model m = model::load_model(require_path(cfg, "checkpoint"));
  const auto ds = load_dataset(cfg, sample_options(m.config().backbone.frames, cfg["smooth"]));
  const bool h_only = cfg["baseline"].get<bool>() || m.fusion().is_baseline();
  std::ostringstream csv;
  csv.precision(17);
  std::size_t width = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::vector<std::size_t> idx{i};
    model::ForwardContext ctx;
    const ad::Var x = ad::constant(training::batch_frames(ds, idx));
    const ad::Var v = h_only ? m.hstar(x, ctx)
                             : m.fused(x, ad::constant(training::batch_dmarkers(ds, idx)), ctx);
    if (i == 0) {
      width = v.value().size();
      csv << "id,label";
      for (std::size_t j = 0; j < width; ++j) csv << ",e" << j;
      csv << '\n';
    }
    csv << ds[i].id << ',' << ds[i].label;
    for (double e : v.value().data()) csv << ',' << e;
    csv << '\n';
  }
  write_file(dir / "embeddings.csv", csv.str());
  out << "exported " << ds.size() << " embeddings of width " << width << '\n';
  return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const UnknownKind*>(&e) ||
      dynamic_cast<const TooFewSubjects*>(&e) || dynamic_cast<const EmptyClass*>(&e) ||
      dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SchemaVersionMismatch*>(&e) ||
      dynamic_cast<const UnsupportedInferenceMode*>(&e)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Genuine vs posed smile classification with D-Marker fusion", "smilefusion"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<FlagSet>> sets;
  std::map<CLI::App*, std::function<int(const json&)>> handlers;
  auto command = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sets.push_back(std::make_unique<FlagSet>(sub));
    return std::make_pair(sub, sets.back().get());
  };

  {
    auto [sub, f] = command("synth", "Generate a synthetic landmark corpus");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("n", Kind::UInt, 200, "Number of videos");
    f->add("subjects", Kind::UInt, nullptr, "Number of subjects (n/4 by default)");
    f->add("fps", Kind::Real, 25.0, "Frame rate");
    f->add("noise", Kind::Real, 0.0, "Landmark noise std in inter-ocular units");
    f->add("genuine-frac", Kind::Real, 0.5, "Fraction of genuine smiles");
    f->add("full-mesh", Kind::Bool, false, "Write 478-point frames");
    handlers[sub] = [&out](const json& c) { return cmd_synth(c, out); };
  }
  {
    auto [sub, f] = command("extract", "Write the 225 D-Marker features per video");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("smooth", Kind::Bool, false, "Smooth signals before segmentation");
    f->add("drop-group", Kind::Str, "", "Comma list of duration, position, motion to zero");
    f->add("drop-region", Kind::Str, "", "Comma list of lip, eye, cheek to zero");
    handlers[sub] = [&out, &err](const json& c) { return cmd_extract(c, out, err); };
  }
  {
    auto [sub, f] = command("train", "Train one model on a manifest");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    add_model_flags(*f);
    add_train_flags(*f);
    handlers[sub] = [&out](const json& c) { return cmd_train(c, out); };
  }
  {
    auto [sub, f] = command("eval", "Score a manifest with a trained checkpoint");
    f->add("checkpoint", Kind::Str, "", "checkpoint.json (model_manifest.json alongside)");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("smooth", Kind::Bool, false, "Smooth D-Marker signals before segmentation");
    handlers[sub] = [&out](const json& c) { return cmd_eval(c, out); };
  }
  {
    auto [sub, f] = command("crossval", "Subject-independent k-fold cross-validation");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("folds", Kind::UInt, 10, "Number of folds");
    add_model_flags(*f);
    add_train_flags(*f);
    handlers[sub] = [&out](const json& c) { return cmd_crossval(c, out); };
  }
  {
    auto [sub, f] = command("fusion-bench", "Cross-validate every fusion kind on one fold plan");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("folds", Kind::UInt, 10, "Number of folds");
    f->add("seeds", Kind::UInt, 1, "Training seeds per kind (seed, seed+1, ...)");
    f->add("include-baseline", Kind::Bool, false, "Also run the no-fusion baseline");
    add_model_flags(*f);
    add_train_flags(*f);
    handlers[sub] = [&out](const json& c) { return cmd_fusion_bench(c, out); };
  }
  {
    auto [sub, f] = command("grad-check", "Finite-difference gradient suite");
    f->add("out", Kind::Str, "", "Optional output directory");
    f->add("inject-fault", Kind::Bool, false, "Add a target with a broken backward rule");
    handlers[sub] = [&out](const json& c) { return cmd_grad_check(c, out); };
  }
  {
    auto [sub, f] = command("export-embeddings", "Write fused vectors per video");
    f->add("checkpoint", Kind::Str, "", "checkpoint.json (model_manifest.json alongside)");
    f->add("manifest", Kind::Str, "", "Manifest CSV");
    f->add("out", Kind::Str, "", "Output directory");
    f->add("baseline", Kind::Bool, false, "Export the width-Q H projection instead of F");
    f->add("smooth", Kind::Bool, false, "Smooth D-Marker signals before segmentation");
    handlers[sub] = [&out](const json& c) { return cmd_export(c, out); };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    for (const auto& s : sets) {
      if (s->app() == sub) return handlers.at(sub)(s->resolve());
    }
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace smilefusion::cli
