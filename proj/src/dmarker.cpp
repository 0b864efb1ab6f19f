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

#include "smilefusion/dmarker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smilefusion/error.hpp"

namespace smilefusion::dmarker {

namespace {

using geometry::KeyPoint;
using geometry::LandmarkFrame;

constexpr double kMinLength = 1e-12;

double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }

void require_frames(const LandmarkSequence& seq) {
  if (seq.frames.empty()) throw InvalidArgument("sequence has no frames");
  if (seq.point_count() != geometry::kKeyPointCount) {
    throw InvalidArgument("D-Marker signals need normalized 11-point frames");
  }
}

// Shared form of the lip and cheek signals: displacement of two points from
// their first-frame midpoint, relative to the first-frame separation.
RegionSignal corner_signal(const LandmarkSequence& seq, Region region,
                           KeyPoint right, KeyPoint left, Side side) {
  require_frames(seq);
  const LandmarkFrame& base = seq.frames.front();
  const Point3 mid = 0.5 * (base[right] + base[left]);
  const double width = distance(base[right], base[left]);
  if (width < kMinLength) {
    throw DegenerateGeometry(std::string(region_name(region)) +
                             " reference width is zero in frame 0");
  }
  RegionSignal out{{}, region, side};
  out.values.reserve(seq.frames.size());
  for (const LandmarkFrame& f : seq.frames) {
    const double dr = distance(mid, f[right]);
    const double dl = distance(mid, f[left]);
    switch (side) {
      case Side::Both: out.values.push_back((dr + dl) / (2.0 * width)); break;
      case Side::Left: out.values.push_back(dl / width); break;
      case Side::Right: out.values.push_back(dr / width); break;
    }
  }
  return out;
}

double eyelid_term(const LandmarkFrame& f, KeyPoint corner_a, KeyPoint center,
                   KeyPoint corner_b) {
  const Point3 mid = 0.5 * (f[corner_a] + f[corner_b]);
  return vertical_relation(mid, f[center]) * distance(mid, f[center]);
}

double chord(const LandmarkFrame& f, KeyPoint a, KeyPoint b) {
  const double len = distance(f[a], f[b]);
  if (len < kMinLength) throw DegenerateGeometry("eye chord has zero length");
  return len;
}

std::vector<double> moving_average3(const std::vector<double>& v) {
  if (v.size() < 3) return v;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(v.size() - 1, i + 1);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += v[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct Run {
  std::size_t first = 0;  // frame where the run starts
  std::size_t steps = 0;  // number of monotone steps
};

// Maximal runs of steps whose sign matches `sign` (+1 rising, -1 falling).
std::vector<Run> monotone_runs(std::span<const double> v, int sign) {
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i + 1 < v.size()) {
    const double d = v[i + 1] - v[i];
    if ((sign > 0 && d > 0.0) || (sign < 0 && d < 0.0)) {
      Run r{i, 0};
      while (i + 1 < v.size()) {
        const double step = v[i + 1] - v[i];
        if (!((sign > 0 && step > 0.0) || (sign < 0 && step < 0.0))) break;
        ++r.steps;
        ++i;
      }
      runs.push_back(r);
    } else {
      ++i;
    }
  }
  return runs;
}

double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

double abs_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

double max_or_zero(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double max_abs_or_zero(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double ratio_or_zero(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

void split_by_sign(const std::vector<double>& v, std::vector<double>& pos,
                   std::vector<double>& neg) {
  for (double x : v) {
    if (x > 0.0) pos.push_back(x);
    else if (x < 0.0) neg.push_back(x);
  }
}

}  // namespace

std::string_view region_name(Region r) {
  switch (r) {
    case Region::Lip: return "lip";
    case Region::Eye: return "eye";
    case Region::Cheek: return "cheek";
  }
  return "?";
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Onset: return "onset";
    case Phase::Apex: return "apex";
    case Phase::Offset: return "offset";
  }
  return "?";
}

int vertical_relation(const Point3& a, const Point3& b) {
  return b.y() < a.y() ? -1 : 1;
}

RegionSignal lip_signal(const LandmarkSequence& normalized, Side side) {
  return corner_signal(normalized, Region::Lip, geometry::kRightLipCorner,
                       geometry::kLeftLipCorner, side);
}

RegionSignal cheek_signal(const LandmarkSequence& normalized, Side side) {
  return corner_signal(normalized, Region::Cheek, geometry::kRightCheek,
                       geometry::kLeftCheek, side);
}

RegionSignal eye_signal(const LandmarkSequence& normalized, Side side) {
  require_frames(normalized);
  RegionSignal out{{}, Region::Eye, side};
  out.values.reserve(normalized.frames.size());
  for (const LandmarkFrame& f : normalized.frames) {
    const double right = eyelid_term(f, geometry::kRightEyeOuter,
                                     geometry::kRightEyeCenter,
                                     geometry::kRightEyeInner);
    const double left = eyelid_term(f, geometry::kLeftEyeInner,
                                    geometry::kLeftEyeCenter,
                                    geometry::kLeftEyeOuter);
    switch (side) {
      case Side::Both: {
        // Both eyes share the right-eye chord as denominator.
        const double c = chord(f, geometry::kRightEyeOuter, geometry::kRightEyeInner);
        out.values.push_back((right + left) / (2.0 * c));
        break;
      }
      case Side::Left:
        out.values.push_back(
            left / chord(f, geometry::kLeftEyeInner, geometry::kLeftEyeOuter));
        break;
      case Side::Right:
        out.values.push_back(
            right / chord(f, geometry::kRightEyeOuter, geometry::kRightEyeInner));
        break;
    }
  }
  return out;
}

RegionSignal region_signal(const LandmarkSequence& normalized, Region region,
                           Side side) {
  switch (region) {
    case Region::Lip: return lip_signal(normalized, side);
    case Region::Eye: return eye_signal(normalized, side);
    case Region::Cheek: return cheek_signal(normalized, side);
  }
  throw InvalidArgument("unknown region");
}

SmilePhases segment_phases(std::span<const double> signal) {
  if (signal.size() < 3) {
    throw InvalidArgument("phase segmentation needs at least 3 frames");
  }
  const std::vector<Run> rising = monotone_runs(signal, +1);
  const std::vector<Run> falling = monotone_runs(signal, -1);
  if (rising.empty() && falling.empty()) {
    throw NoPhaseStructure("signal is constant");
  }

  SmilePhases phases;
  if (!rising.empty()) {
    Run best = rising.front();
    for (const Run& r : rising) {
      if (r.steps > best.steps) best = r;
    }
    phases.onset = {best.first, best.first + best.steps};
  }

  const std::size_t onset_end = phases.onset.last;
  const Run* offset = nullptr;
  for (const Run& r : falling) {
    if (r.first < onset_end) continue;
    if (offset == nullptr || r.steps > offset->steps) offset = &r;
  }
  if (offset != nullptr) {
    phases.offset = {offset->first, offset->first + offset->steps};
  } else {
    const std::size_t last = signal.size() - 1;
    phases.offset = {last, last};
  }
  phases.apex = {onset_end, phases.offset.first};
  return phases;
}

MonotoneSplit split_monotone(std::span<const double> segment) {
  if (segment.empty()) throw InvalidArgument("segment must be non-empty");
  MonotoneSplit out;
  for (std::size_t i = 0; i + 1 < segment.size(); ++i) {
    const double d = segment[i + 1] - segment[i];
    if (d > 0.0) out.increments.push_back(d);
    else if (d < 0.0) out.decrements.push_back(d);
  }
  return out;
}

const std::array<std::string_view, kPhaseFeatureCount>& phase_feature_names() {
  static const std::array<std::string_view, kPhaseFeatureCount> names{
      "duration_inc",          "duration_dec",
      "duration",              "duration_ratio_inc",
      "duration_ratio_dec",    "max_amplitude",
      "mean_amplitude",        "mean_amplitude_inc",
      "mean_amplitude_dec",    "std_amplitude",
      "total_amplitude_inc",   "total_amplitude_dec",
      "net_amplitude",         "amplitude_ratio_inc",
      "amplitude_ratio_dec",   "max_speed_inc",
      "max_speed_dec",         "mean_speed_inc",
      "mean_speed_dec",        "max_acceleration_inc",
      "max_acceleration_dec",  "mean_acceleration_inc",
      "mean_acceleration_dec", "amplitude_duration_ratio",
      "amplitude_difference"};
  return names;
}

FeatureGroup feature_group(std::size_t f) {
  if (f <= kDurationRatioDec) return FeatureGroup::Duration;
  if (f >= kMaxSpeedInc && f <= kMeanAccelerationDec) return FeatureGroup::Motion;
  return FeatureGroup::Position;
}

PhaseFeatures phase_features(std::span<const double> segment,
                             std::span<const double> left_segment,
                             std::span<const double> right_segment, double fps) {
  if (segment.empty()) throw InvalidArgument("phase segment is empty");
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  if (left_segment.size() != segment.size() ||
      right_segment.size() != segment.size()) {
    throw InvalidArgument("left/right segments must match the phase length");
  }

  const MonotoneSplit split = split_monotone(segment);
  const double n = static_cast<double>(segment.size());
  const double n_inc = static_cast<double>(split.increments.size());
  const double n_dec = static_cast<double>(split.decrements.size());
  const double sum_inc = sum(split.increments);
  const double sum_dec = abs_sum(split.decrements);
  const double mean = sum(segment) / n;
  double var = 0.0;
  for (double v : segment) var += (v - mean) * (v - mean);
  var /= n;

  std::vector<double> velocity;
  for (std::size_t i = 0; i + 1 < segment.size(); ++i) {
    velocity.push_back((segment[i + 1] - segment[i]) * fps);
  }
  std::vector<double> acceleration;
  for (std::size_t i = 0; i + 2 < segment.size(); ++i) {
    acceleration.push_back((segment[i + 2] - 2.0 * segment[i + 1] + segment[i]) *
                           fps * fps);
  }
  std::vector<double> v_pos, v_neg, a_pos, a_neg;
  split_by_sign(velocity, v_pos, v_neg);
  split_by_sign(acceleration, a_pos, a_neg);

  PhaseFeatures f{};
  f[kDurationInc] = n_inc / fps;
  f[kDurationDec] = n_dec / fps;
  f[kDuration] = n / fps;
  f[kDurationRatioInc] = n_inc / n;
  f[kDurationRatioDec] = n_dec / n;
  f[kMaxAmplitude] = *std::max_element(segment.begin(), segment.end());
  f[kMeanAmplitude] = mean;
  f[kMeanAmplitudeInc] = ratio_or_zero(sum_inc, n_inc);
  f[kMeanAmplitudeDec] = ratio_or_zero(sum_dec, n_dec);
  f[kStdAmplitude] = std::sqrt(var);
  f[kTotalAmplitudeInc] = sum_inc;
  f[kTotalAmplitudeDec] = sum_dec;
  f[kNetAmplitude] = sum_inc - sum_dec;
  f[kAmplitudeRatioInc] = ratio_or_zero(sum_inc, sum_inc + sum_dec);
  f[kAmplitudeRatioDec] = ratio_or_zero(sum_dec, sum_inc + sum_dec);
  f[kMaxSpeedInc] = max_or_zero(v_pos);
  f[kMaxSpeedDec] = max_abs_or_zero(v_neg);
  f[kMeanSpeedInc] = ratio_or_zero(sum(v_pos), static_cast<double>(v_pos.size()));
  f[kMeanSpeedDec] = ratio_or_zero(abs_sum(v_neg), static_cast<double>(v_neg.size()));
  f[kMaxAccelerationInc] = max_or_zero(a_pos);
  f[kMaxAccelerationDec] = max_abs_or_zero(a_neg);
  f[kMeanAccelerationInc] =
      ratio_or_zero(sum(a_pos), static_cast<double>(a_pos.size()));
  f[kMeanAccelerationDec] =
      ratio_or_zero(abs_sum(a_neg), static_cast<double>(a_neg.size()));
  f[kAmplitudeDurationRatio] = (sum_inc - sum_dec) * fps / n;
  f[kAmplitudeDifference] = std::fabs(sum(left_segment) - sum(right_segment)) / n;
  return f;
}

std::size_t dmarker_index(Region r, Phase p, std::size_t feature) {
  return (static_cast<std::size_t>(r) * kPhaseCount + static_cast<std::size_t>(p)) *
             kPhaseFeatureCount +
         feature;
}

std::vector<std::string> dmarker_feature_names() {
  std::vector<std::string> names;
  names.reserve(kDMarkerSize);
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      for (std::string_view f : phase_feature_names()) {
        names.push_back(std::string(region_name(static_cast<Region>(r))) + "_" +
                        std::string(phase_name(static_cast<Phase>(p))) + "_" +
                        std::string(f));
      }
    }
  }
  return names;
}

DMarkerTrace extract_dmarker_trace(const LandmarkSequence& seq,
                                   const ExtractOptions& options) {
  seq.validate();
  const LandmarkSequence norm = geometry::normalize_sequence(seq, options.keypoints);

  DMarkerTrace trace;
  std::array<RegionSignal, kRegionCount> left, right;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const Region region = static_cast<Region>(r);
    trace.signals[r] = region_signal(norm, region, Side::Both);
    left[r] = region_signal(norm, region, Side::Left);
    right[r] = region_signal(norm, region, Side::Right);
    if (options.smooth) {
      trace.signals[r].values = moving_average3(trace.signals[r].values);
      left[r].values = moving_average3(left[r].values);
      right[r].values = moving_average3(right[r].values);
    }
  }

  trace.phases = segment_phases(trace.signals[static_cast<std::size_t>(Region::Lip)].values);
  const std::array<PhaseSpan, kPhaseCount> spans{trace.phases.onset, trace.phases.apex,
                                                 trace.phases.offset};

  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const std::span<const double> both(trace.signals[r].values);
    const std::span<const double> l(left[r].values);
    const std::span<const double> rt(right[r].values);
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      const PhaseSpan s = spans[p];
      const PhaseFeatures feats =
          phase_features(both.subspan(s.first, s.frames()),
                         l.subspan(s.first, s.frames()),
                         rt.subspan(s.first, s.frames()), seq.fps);
      for (std::size_t f = 0; f < kPhaseFeatureCount; ++f) {
        const bool dropped =
            options.drop_region[r] ||
            options.drop_group[static_cast<std::size_t>(feature_group(f))];
        trace.values[dmarker_index(static_cast<Region>(r), static_cast<Phase>(p), f)] =
            dropped ? 0.0 : feats[f];
      }
    }
  }
  return trace;
}

DMarkerVector extract_dmarker(const LandmarkSequence& seq,
                              const ExtractOptions& options) {
  return extract_dmarker_trace(seq, options).values;
}

}  // namespace smilefusion::dmarker
