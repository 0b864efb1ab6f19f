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

#ifndef SMILEFUSION_INIT_HPP_
#define SMILEFUSION_INIT_HPP_

#include <cmath>
#include <random>

#include "smilefusion/tensor.hpp"

namespace smilefusion {

using Rng = std::mt19937_64;

// He (Kaiming) normal initialization: N(0, 2 / fan_in).
inline ad::Tensor he_normal(ad::Shape shape, std::size_t fan_in, Rng& rng) {
  ad::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace smilefusion

#endif  // SMILEFUSION_INIT_HPP_
