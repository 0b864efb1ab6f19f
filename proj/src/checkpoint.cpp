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

#include "smilefusion/checkpoint.hpp"

#include <fstream>

#include "smilefusion/error.hpp"

namespace smilefusion::ad {

nlohmann::json checkpoint_to_json(const ParameterSet& params) {
  nlohmann::json list = nlohmann::json::array();
  for (const Parameter& p : params.items()) {
    const Tensor& v = p.var.value();
    list.push_back({{"name", p.name},
                    {"shape", v.shape()},
                    {"data", std::vector<double>(v.data().begin(), v.data().end())}});
  }
  return {{"format_version", kCheckpointFormatVersion}, {"params", std::move(list)}};
}

void checkpoint_from_json(const nlohmann::json& j, ParameterSet& params) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw SchemaVersionMismatch("checkpoint format_version " + std::to_string(version) +
                                  ", expected " +
                                  std::to_string(kCheckpointFormatVersion));
    }
    const auto& list = j.at("params");
    if (list.size() != params.size()) {
      throw ParseError("checkpoint holds " + std::to_string(list.size()) +
                       " parameters, model has " + std::to_string(params.size()));
    }
    for (const auto& entry : list) {
      const std::string name = entry.at("name").get<std::string>();
      Parameter* p = params.find(name);
      if (p == nullptr) throw ParseError("checkpoint parameter not in model: " + name);
      const Shape shape = entry.at("shape").get<Shape>();
      if (shape != p->var.shape()) {
        throw ShapeMismatch("checkpoint parameter " + name + " has shape " +
                            shape_string(shape) + ", model expects " +
                            shape_string(p->var.shape()));
      }
      p->var.mutable_value() = Tensor(shape, entry.at("data").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << checkpoint_to_json(params).dump() << '\n';
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  checkpoint_from_json(j, params);
}

}  // namespace smilefusion::ad
