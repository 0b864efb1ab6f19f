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

#ifndef SMILEFUSION_GRAD_CHECK_HPP_
#define SMILEFUSION_GRAD_CHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "smilefusion/tensor.hpp"

namespace smilefusion::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::size_t worst_var = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients of the scalar `f` with central differences
// for every entry of every Var in `wrt`. The relative error of one entry is
// |g_ad - g_fd| / max(floor * max(1, |f|), |g_ad| + |g_fd|); the floor keeps
// rounding noise on exactly-zero gradients from reading as an error. Entries
// above 1e-6 are retried at h/10 and h/100 and keep the smallest error, so a
// step that straddles a relu kink does not count against a correct rule. `f`
// must rebuild its graph on each call and be deterministic.
GradCheckResult grad_check(const std::function<Var()>& f, const std::vector<Var>& wrt,
                           double h = 1e-5, double floor = 1e-5);

}  // namespace smilefusion::ad

#endif  // SMILEFUSION_GRAD_CHECK_HPP_
