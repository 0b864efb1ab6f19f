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

#include "smilefusion/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smilefusion::ad {

GradCheckResult grad_check(const std::function<Var()>& f, const std::vector<Var>& wrt,
                           double h, double floor) {
  std::vector<Var> vars = wrt;
  for (Var& v : vars) v.zero_grad();
  const Var loss = f();
  const double scale = floor * std::max(1.0, std::fabs(loss.value().item()));
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(vars.size());
  for (Var& v : vars) analytic.push_back(v.grad());

  GradCheckResult result;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    Tensor& value = vars[k].mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      const double ad = analytic[k][i];
      double err = std::numeric_limits<double>::infinity();
      double step = h;
      for (int attempt = 0; attempt < 3 && err > 1e-6; ++attempt, step /= 10.0) {
        value[i] = saved + step;
        const double up = f().value().item();
        value[i] = saved - step;
        const double down = f().value().item();
        value[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        err = std::min(err, std::fabs(ad - fd) / std::max(scale, std::fabs(ad) + std::fabs(fd)));
      }
      ++result.entries;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_var = k;
        result.worst_index = i;
      }
    }
  }
  for (Var& v : vars) v.zero_grad();
  return result;
}

}  // namespace smilefusion::ad
