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

// Test helpers and independent reference implementations.

#ifndef SMILEFUSION_TESTS_SUPPORT_HPP_
#define SMILEFUSION_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "smilefusion/dmarker.hpp"
#include "smilefusion/geometry.hpp"
#include "smilefusion/init.hpp"

namespace sf_test {

using smilefusion::Rng;
using smilefusion::geometry::LandmarkFrame;
using smilefusion::geometry::LandmarkSequence;
using smilefusion::geometry::Point3;
using smilefusion::geometry::RigidPose;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Neutral 11-point face: right eye on -x, y up, z out of the face.
inline LandmarkFrame neutral_face() {
  return {Point3(-0.50, 0.35, 0.00),  Point3(-0.34, 0.41, 0.03),  Point3(-0.18, 0.35, 0.02),
          Point3(0.18, 0.35, 0.02),   Point3(0.34, 0.41, 0.03),   Point3(0.50, 0.35, 0.00),
          Point3(-0.38, 0.02, 0.06),  Point3(0.38, 0.02, 0.06),   Point3(0.00, 0.00, 0.30),
          Point3(-0.25, -0.35, 0.10), Point3(0.25, -0.35, 0.10)};
}

inline RigidPose random_pose(Rng& rng, double max_deg = 45.0) {
  const double a = max_deg * 3.14159265358979323846 / 180.0;
  RigidPose p;
  p.rotation = smilefusion::geometry::rotation_from_euler(uniform(rng, -a, a), uniform(rng, -a, a),
                                                          uniform(rng, -a, a));
  p.scale = uniform(rng, 0.5, 2.0);
  p.translation = Point3(uniform(rng, -100, 100), uniform(rng, -100, 100), uniform(rng, -100, 100));
  return p;
}

// A smile-like sequence with random per-frame perturbations around a
// rise-hold-fall lip trajectory.
inline LandmarkSequence random_smile(Rng& rng, std::size_t frames, double noise = 0.01) {
  LandmarkSequence seq;
  seq.fps = 25.0;
  seq.label = static_cast<int>(rng() % 2);
  seq.subject_id = "s";
  std::normal_distribution<double> n(0.0, noise);
  const std::size_t peak = frames / 2;
  for (std::size_t t = 0; t < frames; ++t) {
    const double s = t <= peak ? double(t) / double(peak) : double(frames - 1 - t) / double(frames - 1 - peak);
    LandmarkFrame f = neutral_face();
    f[9] += 0.1 * s * Point3(-0.8, 0.6, 0.0);
    f[10] += 0.1 * s * Point3(0.8, 0.6, 0.0);
    f[1].y() -= 0.02 * s;
    f[4].y() -= 0.02 * s;
    f[6].y() += 0.04 * s;
    f[7].y() += 0.04 * s;
    for (auto& p : f) p += Point3(n(rng), n(rng), n(rng));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto base = std::filesystem::temp_directory_path() /
                    ("smilefusion_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

// ---- reference segmentation --------------------------------------------------

struct RefRun {
  std::size_t first, last;
};

// All maximal runs [i, j] whose every step is strictly up (dir=+1) or down.
inline std::vector<RefRun> brute_force_runs(const std::vector<double>& v, int dir) {
  auto step_ok = [&](std::size_t k) { return dir > 0 ? v[k + 1] > v[k] : v[k + 1] < v[k]; };
  std::vector<RefRun> runs;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      bool all = true;
      for (std::size_t k = i; k < j; ++k) all = all && step_ok(k);
      if (!all) continue;
      const bool left_max = i == 0 || !step_ok(i - 1);
      const bool right_max = j + 1 == v.size() || !step_ok(j);
      if (left_max && right_max) runs.push_back({i, j});
    }
  }
  return runs;
}

struct RefPhases {
  std::size_t onset_first, onset_last, apex_first, apex_last, offset_first, offset_last;
  bool constant;
};

inline RefPhases brute_force_phases(const std::vector<double>& v) {
  RefPhases p{0, 0, 0, 0, 0, 0, false};
  const auto up = brute_force_runs(v, +1);
  const auto down = brute_force_runs(v, -1);
  if (up.empty() && down.empty()) {
    p.constant = true;
    return p;
  }
  std::size_t best = 0;
  bool have = false;
  for (const auto& r : up) {
    if (!have || r.last - r.first > best) {
      best = r.last - r.first;
      p.onset_first = r.first;
      p.onset_last = r.last;
      have = true;
    }
  }
  have = false;
  best = 0;
  for (const auto& r : down) {
    if (r.first < p.onset_last) continue;
    if (!have || r.last - r.first > best) {
      best = r.last - r.first;
      p.offset_first = r.first;
      p.offset_last = r.last;
      have = true;
    }
  }
  if (!have) p.offset_first = p.offset_last = v.size() - 1;
  p.apex_first = p.onset_last;
  p.apex_last = p.offset_first;
  return p;
}

// ---- reference phase features ------------------------------------------------

inline std::array<double, 25> reference_phase_features(const std::vector<double>& d,
                                                      const std::vector<double>& left,
                                                      const std::vector<double>& right,
                                                      double w) {
  std::vector<double> dp, dm, vp, vm, ap, am;
  for (std::size_t t = 0; t + 1 < d.size(); ++t) {
    const double delta = d[t + 1] - d[t];
    if (delta > 0) dp.push_back(delta);
    if (delta < 0) dm.push_back(delta);
    const double v = delta * w;
    if (v > 0) vp.push_back(v);
    if (v < 0) vm.push_back(v);
  }
  for (std::size_t t = 0; t + 2 < d.size(); ++t) {
    const double a = (d[t + 2] - 2 * d[t + 1] + d[t]) * w * w;
    if (a > 0) ap.push_back(a);
    if (a < 0) am.push_back(a);
  }
  auto eta = [](const std::vector<double>& s) { return double(s.size()); };
  auto total = [](const std::vector<double>& s) { return std::accumulate(s.begin(), s.end(), 0.0); };
  auto total_abs = [](const std::vector<double>& s) {
    double r = 0;
    for (double x : s) r += std::fabs(x);
    return r;
  };
  auto safe_div = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  auto max_of = [](const std::vector<double>& s) {
    return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
  };
  auto max_abs = [](const std::vector<double>& s) {
    double r = 0;
    for (double x : s) r = std::max(r, std::fabs(x));
    return r;
  };
  const double n = eta(d);
  const double mean = total(d) / n;
  double var = 0;
  for (double x : d) var += (x - mean) * (x - mean);
  const double sp = total(dp), sm = total_abs(dm);
  return {eta(dp) / w,
          eta(dm) / w,
          n / w,
          eta(dp) / n,
          eta(dm) / n,
          *std::max_element(d.begin(), d.end()),
          mean,
          safe_div(sp, eta(dp)),
          safe_div(sm, eta(dm)),
          std::sqrt(var / n),
          sp,
          sm,
          sp - sm,
          safe_div(sp, sp + sm),
          safe_div(sm, sp + sm),
          max_of(vp),
          max_abs(vm),
          safe_div(total(vp), eta(vp)),
          safe_div(total_abs(vm), eta(vm)),
          max_of(ap),
          max_abs(am),
          safe_div(total(ap), eta(ap)),
          safe_div(total_abs(am), eta(am)),
          (sp - sm) * w / n,
          std::fabs(total(left) - total(right)) / n};
}

inline double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

}  // namespace sf_test

#endif  // SMILEFUSION_TESTS_SUPPORT_HPP_
