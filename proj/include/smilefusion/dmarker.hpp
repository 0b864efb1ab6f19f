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

#ifndef SMILEFUSION_DMARKER_HPP_
#define SMILEFUSION_DMARKER_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smilefusion/geometry.hpp"

namespace smilefusion::dmarker {

using geometry::LandmarkSequence;
using geometry::Point3;

enum class Region { Lip = 0, Eye = 1, Cheek = 2 };
enum class Side { Both, Left, Right };
enum class Phase { Onset = 0, Apex = 1, Offset = 2 };

inline constexpr std::size_t kRegionCount = 3;
inline constexpr std::size_t kPhaseCount = 3;
inline constexpr std::size_t kPhaseFeatureCount = 25;
inline constexpr std::size_t kDMarkerSize =
    kRegionCount * kPhaseCount * kPhaseFeatureCount;  // 225

using PhaseFeatures = std::array<double, kPhaseFeatureCount>;
using DMarkerVector = std::array<double, kDMarkerSize>;

std::string_view region_name(Region r);
std::string_view phase_name(Phase p);

struct RegionSignal {
  std::vector<double> values;
  Region region = Region::Lip;
  Side side = Side::Both;
};

// Closed frame span [first, last]. Neighbouring phases share their boundary
// frame, so a phase always holds at least one frame.
struct PhaseSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t frames() const { return last - first + 1; }
  bool operator==(const PhaseSpan&) const = default;
};

struct SmilePhases {
  PhaseSpan onset;
  PhaseSpan apex;
  PhaseSpan offset;

  bool operator==(const SmilePhases&) const = default;
};

// -1 when b lies below a on the normalized face (b.y < a.y), +1 otherwise.
int vertical_relation(const Point3& a, const Point3& b);

RegionSignal lip_signal(const LandmarkSequence& normalized, Side side = Side::Both);
RegionSignal eye_signal(const LandmarkSequence& normalized, Side side = Side::Both);
RegionSignal cheek_signal(const LandmarkSequence& normalized, Side side = Side::Both);
RegionSignal region_signal(const LandmarkSequence& normalized, Region region,
                           Side side = Side::Both);

// Onset is the longest maximal run of strictly increasing steps (earliest on
// ties), offset the longest strictly decreasing run starting at or after the
// onset end, apex the frames between them. Without any rising step the onset
// collapses to frame 0; without a falling step after the onset the offset is
// the last frame.
SmilePhases segment_phases(std::span<const double> signal);

struct MonotoneSplit {
  std::vector<double> increments;  // positive first differences
  std::vector<double> decrements;  // negative first differences (signed)
};

MonotoneSplit split_monotone(std::span<const double> segment);

// Index of each value inside PhaseFeatures.
enum PhaseFeature : std::size_t {
  kDurationInc = 0,
  kDurationDec,
  kDuration,
  kDurationRatioInc,
  kDurationRatioDec,
  kMaxAmplitude,
  kMeanAmplitude,
  kMeanAmplitudeInc,
  kMeanAmplitudeDec,
  kStdAmplitude,
  kTotalAmplitudeInc,
  kTotalAmplitudeDec,
  kNetAmplitude,
  kAmplitudeRatioInc,
  kAmplitudeRatioDec,
  kMaxSpeedInc,
  kMaxSpeedDec,
  kMeanSpeedInc,
  kMeanSpeedDec,
  kMaxAccelerationInc,
  kMaxAccelerationDec,
  kMeanAccelerationInc,
  kMeanAccelerationDec,
  kAmplitudeDurationRatio,
  kAmplitudeDifference,
};

const std::array<std::string_view, kPhaseFeatureCount>& phase_feature_names();

// Feature groups used by the ablation masks.
enum class FeatureGroup { Duration, Position, Motion };
FeatureGroup feature_group(std::size_t phase_feature);

PhaseFeatures phase_features(std::span<const double> segment,
                             std::span<const double> left_segment,
                             std::span<const double> right_segment, double fps);

struct ExtractOptions {
  // Moving average (window 3) over every signal before segmentation.
  bool smooth = false;
  // Zeroed entries keep the vector at 225 values.
  std::array<bool, 3> drop_group{false, false, false};   // FeatureGroup order
  std::array<bool, 3> drop_region{false, false, false};  // Region order
  geometry::KeyPointSet keypoints{};
};

struct DMarkerTrace {
  SmilePhases phases;
  std::array<RegionSignal, kRegionCount> signals;
  DMarkerVector values{};
};

std::size_t dmarker_index(Region r, Phase p, std::size_t feature);
std::vector<std::string> dmarker_feature_names();

DMarkerVector extract_dmarker(const LandmarkSequence& seq,
                              const ExtractOptions& options = {});
DMarkerTrace extract_dmarker_trace(const LandmarkSequence& seq,
                                   const ExtractOptions& options = {});

}  // namespace smilefusion::dmarker

#endif  // SMILEFUSION_DMARKER_HPP_
