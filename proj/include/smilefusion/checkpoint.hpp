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

#ifndef SMILEFUSION_CHECKPOINT_HPP_
#define SMILEFUSION_CHECKPOINT_HPP_

#include <filesystem>

#include <json.hpp>

#include "smilefusion/tensor.hpp"

namespace smilefusion::ad {

inline constexpr int kCheckpointFormatVersion = 1;

// {format_version, params: [{name, shape, data}]}. Doubles are written with
// 17 significant digits so a save/load cycle is bit-exact.
nlohmann::json checkpoint_to_json(const ParameterSet& params);

// Overwrites values of `params` from `j`. Every parameter must be present
// with a matching shape; extra entries are rejected.
void checkpoint_from_json(const nlohmann::json& j, ParameterSet& params);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace smilefusion::ad

#endif  // SMILEFUSION_CHECKPOINT_HPP_
