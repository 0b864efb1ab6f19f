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

#ifndef SMILEFUSION_GRAD_SUITE_HPP_
#define SMILEFUSION_GRAD_SUITE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace smilefusion {

inline constexpr double kGradTolerance = 1e-4;

struct GradTarget {
  std::string group;  // "op", "fusion" or "model"
  std::string name;
  double max_rel_error = 0.0;  // worst over all seeds
  std::size_t entries = 0;
  bool passed() const { return max_rel_error < kGradTolerance; }
};

struct GradSuiteOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  // Adds a target whose backward rule is deliberately wrong.
  bool inject_fault = false;
};

// Central-difference checks of every tensor op, every fusion kind (D=16,
// k=12, Q=8) and small end-to-end models.
std::vector<GradTarget> run_grad_suite(const GradSuiteOptions& opt = {});

}  // namespace smilefusion

#endif  // SMILEFUSION_GRAD_SUITE_HPP_
