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

#include "smilefusion/model.hpp"

#include <cmath>
#include <fstream>

#include "smilefusion/checkpoint.hpp"
#include "smilefusion/error.hpp"

namespace smilefusion::model {

namespace {

using ad::Shape;
using ad::Tensor;

Var affine_norm(const Var& x, const Var& gain, const Var& bias) {
  return ad::add(ad::mul(ad::layer_norm(x, -1), gain), bias);
}

// [B, T, d] -> [B, H, T, d / H]
Var split_heads(const Var& x, std::size_t heads) {
  const Shape& s = x.shape();
  return ad::transpose(ad::reshape(x, {s[0], s[1], heads, s[2] / heads}), 1, 2);
}

Var merge_heads(const Var& x) {
  const Shape& s = x.shape();
  return ad::reshape(ad::transpose(x, 1, 2), {s[0], s[2], s[1] * s[3]});
}

}  // namespace

void BackboneConfig::validate() const {
  if (input_points == 0 || spatial_dim == 0 || output_dim == 0 || heads == 0 || ff_mult == 0) {
    throw InvalidArgument("backbone dimensions must be positive");
  }
  if (spatial_dim % heads != 0) throw InvalidArgument("d_s must be divisible by heads");
  if (frames < 2) throw InvalidArgument("T must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
}

BackboneConfig BackboneConfig::paper() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::paper_long() {
  BackboneConfig c;
  c.frames = 64;
  return c;
}

BackboneConfig BackboneConfig::desk() {
  BackboneConfig c;
  c.spatial_dim = 32;
  c.output_dim = 64;
  c.temporal_blocks = 2;
  c.heads = 4;
  return c;
}

Backbone::Backbone(const BackboneConfig& cfg, ad::ParameterSet& params, Rng& rng,
                   const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t in = 3 * cfg_.input_points;
  const std::size_t d = cfg_.spatial_dim;
  const std::size_t ff = cfg_.ff_mult * d;
  auto weight = [&](const std::string& name, std::size_t out, std::size_t fan_in) {
    return params.add(prefix + "." + name + ".weight", he_normal({out, fan_in}, fan_in, rng));
  };
  auto filled = [&](const std::string& name, std::size_t n, double v) {
    return params.add(prefix + "." + name, Tensor({n}, v));
  };

  fc1_w_ = weight("frame.fc1", d, in);
  fc1_b_ = filled("frame.fc1.bias", d, 0.0);
  fc2_w_ = weight("frame.fc2", d, d);
  fc2_b_ = filled("frame.fc2.bias", d, 0.0);
  if (cfg_.positional_encoding) {
    positional_ = params.add(prefix + ".positional", he_normal({cfg_.frames, d}, d, rng));
  }
  for (std::size_t i = 0; i < cfg_.temporal_blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    Block b;
    b.ln1_gain = filled(p + ".ln1.gain", d, 1.0);
    b.ln1_bias = filled(p + ".ln1.bias", d, 0.0);
    b.wq = weight(p + ".query", d, d);
    b.bq = filled(p + ".query.bias", d, 0.0);
    b.wk = weight(p + ".key", d, d);
    b.bk = filled(p + ".key.bias", d, 0.0);
    b.wv = weight(p + ".value", d, d);
    b.bv = filled(p + ".value.bias", d, 0.0);
    b.wo = weight(p + ".out", d, d);
    b.bo = filled(p + ".out.bias", d, 0.0);
    b.ln2_gain = filled(p + ".ln2.gain", d, 1.0);
    b.ln2_bias = filled(p + ".ln2.bias", d, 0.0);
    b.ff1_w = weight(p + ".ff1", ff, d);
    b.ff1_b = filled(p + ".ff1.bias", ff, 0.0);
    b.ff2_w = weight(p + ".ff2", d, ff);
    b.ff2_b = filled(p + ".ff2.bias", d, 0.0);
    blocks_.push_back(std::move(b));
  }
  pool_w_ = weight("pool", cfg_.output_dim, d);
  pool_b_ = filled("pool.bias", cfg_.output_dim, 0.0);
}

Var Backbone::encode_frames(const Var& x) const {
  const Shape& s = x.shape();
  const std::size_t in = 3 * cfg_.input_points;
  Var flat = x;
  if (s.size() == 4 && s[2] == cfg_.input_points && s[3] == 3) {
    flat = ad::reshape(x, {s[0], s[1], in});
  } else if (!(s.size() == 3 && s[2] == in)) {
    throw ShapeMismatch("frame encoder expects [B, T, " + std::to_string(cfg_.input_points) +
                        ", 3], got " + ad::shape_string(s));
  }
  if (s[1] != cfg_.frames) {
    throw ShapeMismatch("sequence length " + std::to_string(s[1]) + " != configured T " +
                        std::to_string(cfg_.frames));
  }
  Var h = ad::relu(ad::linear(flat, fc1_w_, fc1_b_));
  return ad::linear(h, fc2_w_, fc2_b_);
}

Var Backbone::encode_temporal(const Var& s, ForwardContext& ctx,
                              std::vector<Tensor>* attention) const {
  const Shape& sh = s.shape();
  if (sh.size() != 3 || sh[2] != cfg_.spatial_dim) {
    throw ShapeMismatch("temporal encoder expects [B, T, " + std::to_string(cfg_.spatial_dim) +
                        "], got " + ad::shape_string(sh));
  }
  const std::size_t heads = cfg_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg_.spatial_dim / heads));
  Var x = s;
  if (positional_.defined()) {
    if (sh[1] != cfg_.frames) throw ShapeMismatch("positional table needs T frames");
    x = ad::add(x, positional_);
  }
  for (const Block& b : blocks_) {
    Var a = affine_norm(x, b.ln1_gain, b.ln1_bias);
    Var q = split_heads(ad::linear(a, b.wq, b.bq), heads);
    Var k = split_heads(ad::linear(a, b.wk, b.bk), heads);
    Var v = split_heads(ad::linear(a, b.wv, b.bv), heads);
    Var w = ad::softmax_over_axis(ad::scale(ad::matmul(q, ad::transpose(k, -1, -2)), inv_sqrt), -1);
    if (attention) attention->push_back(w.value());
    Var att = ad::linear(merge_heads(ad::matmul(w, v)), b.wo, b.bo);
    x = ad::add(x, ad::dropout(att, cfg_.dropout, ctx.train, ctx.next_seed()));
    Var f = affine_norm(x, b.ln2_gain, b.ln2_bias);
    f = ad::linear(ad::relu(ad::linear(f, b.ff1_w, b.ff1_b)), b.ff2_w, b.ff2_b);
    x = ad::add(x, ad::dropout(f, cfg_.dropout, ctx.train, ctx.next_seed()));
  }
  return x;
}

Var Backbone::pool_project(const Var& t) const {
  if (t.shape().size() != 3 || t.shape()[2] != cfg_.spatial_dim) {
    throw ShapeMismatch("pool expects [B, T, d_s], got " + ad::shape_string(t.shape()));
  }
  return ad::linear(ad::mean_over_axis(t, 1), pool_w_, pool_b_);
}

Var Backbone::forward(const Var& x, ForwardContext& ctx) const {
  return pool_project(encode_temporal(encode_frames(x), ctx));
}

ClassifierHead::ClassifierHead(std::size_t width, ad::ParameterSet& params, Rng& rng,
                               const std::string& prefix) {
  ln_gain = params.add(prefix + ".ln.gain", Tensor({width}, 1.0));
  ln_bias = params.add(prefix + ".ln.bias", Tensor({width}, 0.0));
  weight = params.add(prefix + ".weight", he_normal({1, width}, width, rng));
  bias = params.add(prefix + ".bias", Tensor({1}, 0.0));
}

Var ClassifierHead::classify(const Var& f) const {
  return ad::sigmoid(ad::linear(affine_norm(f, ln_gain, ln_bias), weight, bias));
}

std::string_view inference_mode_name(InferenceMode m) {
  return m == InferenceMode::Strict ? "strict" : "constant-gate";
}

InferenceMode parse_inference_mode(std::string_view name) {
  if (name == "strict") return InferenceMode::Strict;
  if (name == "constant-gate") return InferenceMode::ConstantGate;
  throw InvalidArgument("unknown inference mode '" + std::string(name) +
                        "' (valid: strict, constant-gate)");
}

ModelConfig ModelConfig::make(const BackboneConfig& backbone,
                              std::optional<fusion::FusionKind> kind, std::size_t width,
                              InferenceMode mode) {
  ModelConfig c;
  c.backbone = backbone;
  c.fusion.kind = kind;
  c.fusion.input_dim = backbone.output_dim;
  c.fusion.width = width;
  c.inference_mode = mode;
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  backbone.validate();
  fusion.validate();
  if (fusion.input_dim != backbone.output_dim) {
    throw InvalidArgument("fusion input_dim must equal backbone D");
  }
}

nlohmann::json to_json(const BackboneConfig& c) {
  return {{"input_points", c.input_points}, {"d_s", c.spatial_dim},
          {"D", c.output_dim},              {"temporal_blocks", c.temporal_blocks},
          {"heads", c.heads},               {"dropout", c.dropout},
          {"T", c.frames},                  {"ff_mult", c.ff_mult},
          {"positional_encoding", c.positional_encoding}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  try {
    c.input_points = j.value("input_points", c.input_points);
    c.spatial_dim = j.value("d_s", c.spatial_dim);
    c.output_dim = j.value("D", c.output_dim);
    c.temporal_blocks = j.value("temporal_blocks", c.temporal_blocks);
    c.heads = j.value("heads", c.heads);
    c.dropout = j.value("dropout", c.dropout);
    c.frames = j.value("T", c.frames);
    c.ff_mult = j.value("ff_mult", c.ff_mult);
    c.positional_encoding = j.value("positional_encoding", c.positional_encoding);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("backbone config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json f = {{"kind", c.fusion.kind ? std::string(fusion::fusion_name(*c.fusion.kind))
                                             : std::string("none")},
                      {"dmarker_dim", c.fusion.dmarker_dim},
                      {"width", c.fusion.width},
                      {"heads", c.fusion.heads},
                      {"tokens", c.fusion.tokens}};
  return {{"backbone", to_json(c.backbone)},
          {"fusion", f},
          {"inference_mode", std::string(inference_mode_name(c.inference_mode))}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.backbone = backbone_from_json(j.at("backbone"));
    const auto& f = j.at("fusion");
    const std::string kind = f.value("kind", std::string("hadamard"));
    c.fusion.kind = kind == "none" ? std::nullopt
                                   : std::optional<fusion::FusionKind>(fusion::parse_fusion_kind(kind));
    c.fusion.input_dim = c.backbone.output_dim;
    c.fusion.dmarker_dim = f.value("dmarker_dim", c.fusion.dmarker_dim);
    c.fusion.width = f.value("width", c.fusion.width);
    c.fusion.heads = f.value("heads", c.fusion.heads);
    c.fusion.tokens = f.value("tokens", c.fusion.tokens);
    c.inference_mode = parse_inference_mode(j.value("inference_mode", std::string("strict")));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t backbone_parameter_count(const BackboneConfig& c) {
  const std::size_t d = c.spatial_dim;
  const std::size_t in = 3 * c.input_points;
  const std::size_t ff = c.ff_mult * d;
  std::size_t n = (in * d + d) + (d * d + d);
  if (c.positional_encoding) n += c.frames * d;
  const std::size_t block = 4 * (d * d + d) + 2 * (2 * d) + (d * ff + ff) + (ff * d + d);
  n += c.temporal_blocks * block;
  n += c.output_dim * d + c.output_dim;
  return n;
}

std::size_t head_parameter_count(std::size_t width) { return 2 * width + width + 1; }

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t width =
      c.fusion.kind ? fusion::output_width(*c.fusion.kind, c.fusion.width) : c.fusion.width;
  return backbone_parameter_count(c.backbone) + fusion::projection_parameter_count(c.fusion) +
         fusion::extra_parameter_count(c.fusion) + head_parameter_count(width);
}

std::size_t auxiliary_head_parameter_count(std::size_t in, std::size_t out) {
  return in * out + out + 2 * in;
}

namespace {
const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}
}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : Model(validated(cfg), Rng(seed)) {}

Model::Model(const ModelConfig& cfg, Rng rng)
    : cfg_(cfg),
      backbone_(cfg.backbone, params_, rng),
      fusion_(cfg.fusion, params_, rng),
      head_(fusion_.output_width(), params_, rng) {}

bool Model::admits_video_only() const {
  return fusion_.is_baseline() || cfg_.inference_mode == InferenceMode::ConstantGate;
}

void Model::set_dmarker_stats(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.size() != cfg_.fusion.dmarker_dim || stddev.size() != cfg_.fusion.dmarker_dim) {
    throw ShapeMismatch("D-Marker statistics must have " + std::to_string(cfg_.fusion.dmarker_dim) +
                        " entries");
  }
  for (double& s : stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
  }
  z_mean_ = std::move(mean);
  z_std_ = std::move(stddev);
}

Tensor Model::standardize_tensor(const Tensor& raw) const {
  const std::size_t k = cfg_.fusion.dmarker_dim;
  if (raw.rank() != 2 || raw.shape()[1] != k) {
    throw ShapeMismatch("D-Marker batch must be [B, " + std::to_string(k) + "], got " +
                        ad::shape_string(raw.shape()));
  }
  Tensor out = raw;
  if (z_mean_.empty()) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (out[i] - z_mean_[i % k]) / z_std_[i % k];
  }
  return out;
}

Tensor Model::standardize(std::span<const dmarker::DMarkerVector> batch) const {
  const std::size_t k = cfg_.fusion.dmarker_dim;
  Tensor raw({batch.size(), k});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].size() != k) throw ShapeMismatch("D-Marker vector has wrong length");
    for (std::size_t j = 0; j < k; ++j) raw[b * k + j] = batch[b][j];
  }
  return standardize_tensor(raw);
}

Var Model::standardize_var(const Var& z) const {
  if (z_mean_.empty()) return z;
  Tensor mean = Tensor::vector(z_mean_);
  Tensor inv({z_std_.size()});
  for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / z_std_[j];
  return ad::mul(ad::sub(z, ad::constant(std::move(mean))), ad::constant(std::move(inv)));
}

Var Model::hstar(const Var& x, ForwardContext& ctx) const {
  return fusion_.project_h(backbone_.forward(x, ctx));
}

Var Model::fused(const Var& x, const Var& z, ForwardContext& ctx) const {
  Var h = backbone_.forward(x, ctx);
  if (fusion_.is_baseline()) return fusion_.project_h(h);
  Var hs = fusion_.project_h(h);
  if (z.defined()) {
    return fusion_.combine(hs, fusion_.project_z(standardize_var(z)));
  }
  if (cfg_.inference_mode != InferenceMode::ConstantGate) {
    throw UnsupportedInferenceMode(
        "strict fusion model requires D-Markers; retrain with constant-gate mode for video-only "
        "inference");
  }
  if (zstar_mean_.size() != cfg_.fusion.width) {
    throw UnsupportedInferenceMode("constant-gate model has no stored Z* mean");
  }
  const std::size_t batch = hs.shape()[0];
  Tensor zs({batch, cfg_.fusion.width});
  for (std::size_t i = 0; i < zs.size(); ++i) zs[i] = zstar_mean_[i % cfg_.fusion.width];
  return fusion_.combine(hs, ad::constant(std::move(zs)));
}

Var Model::forward(const Var& x, const Var& z, ForwardContext& ctx) const {
  if (!fusion_.is_baseline() && !z.defined()) {
    throw InvalidArgument("forward needs D-Markers; use forward_inference for video-only input");
  }
  return head_.classify(fused(x, z, ctx));
}

Var Model::forward_inference(const Var& x, ForwardContext& ctx) const {
  if (!admits_video_only()) {
    throw UnsupportedInferenceMode("fusion '" +
                                   std::string(fusion::fusion_name(*cfg_.fusion.kind)) +
                                   "' in strict mode needs D-Markers at inference");
  }
  return head_.classify(fused(x, Var(), ctx));
}

nlohmann::json model_manifest(const Model& m) {
  nlohmann::json j = to_json(m.config());
  j["parameter_count"] = m.parameters().count();
  j["dmarker_mean"] = m.dmarker_mean();
  j["dmarker_std"] = m.dmarker_std();
  j["zstar_mean"] = m.zstar_mean();
  return j;
}

void save_model(const Model& m, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  ad::save_checkpoint(m.parameters(), dir / "checkpoint.json");
  std::ofstream out(dir / "model_manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "model_manifest.json").string());
  out << model_manifest(m).dump(2) << '\n';
}

Model load_model(const std::filesystem::path& checkpoint) {
  const auto manifest_path = checkpoint.parent_path() / "model_manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  Model m(model_config_from_json(j), 0);
  ad::load_checkpoint(checkpoint, m.parameters());
  try {
    auto mean = j.value("dmarker_mean", std::vector<double>{});
    auto sd = j.value("dmarker_std", std::vector<double>{});
    if (!mean.empty()) m.set_dmarker_stats(std::move(mean), std::move(sd));
    m.set_zstar_mean(j.value("zstar_mean", std::vector<double>{}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace smilefusion::model
