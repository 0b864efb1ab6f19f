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

#ifndef SMILEFUSION_DATA_HPP_
#define SMILEFUSION_DATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smilefusion/dmarker.hpp"
#include "smilefusion/geometry.hpp"
#include "smilefusion/tensor.hpp"
#include "smilefusion/training.hpp"

namespace smilefusion::data {

using geometry::LandmarkSequence;

inline constexpr std::string_view kLandmarkSchema = "smilefusion-landmarks-v1";

nlohmann::json landmarks_to_json(const LandmarkSequence& seq);
// `context` prefixes error messages (usually the file path).
LandmarkSequence landmarks_from_json(const nlohmann::json& j, const std::string& context = "");
LandmarkSequence load_landmark_file(const std::filesystem::path& path);
void save_landmark_file(const LandmarkSequence& seq, const std::filesystem::path& path);

struct ManifestRow {
  std::string path;
  std::string subject_id;
  int label = 0;
  double fps = 25.0;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  // Relative row paths resolve against this directory.
  std::filesystem::path base_dir;

  void validate() const;
  std::filesystem::path resolve(const ManifestRow& row) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

nlohmann::json phases_to_json(const dmarker::SmilePhases& p);
dmarker::SmilePhases phases_from_json(const nlohmann::json& j);
void save_sidecar(const dmarker::SmilePhases& p, const std::filesystem::path& path);
dmarker::SmilePhases load_sidecar(const std::filesystem::path& path);
// foo.json -> foo.phases.json
std::filesystem::path sidecar_path(const std::filesystem::path& landmark_file);

// [T, P, 3]: the first T frames, zero frames appended when shorter.
ad::Tensor pad_truncate(const LandmarkSequence& seq, std::size_t frames);

// Per-frame pose normalization that keeps every point (full meshes stay full).
LandmarkSequence normalize_all_points(const LandmarkSequence& seq,
                                      const geometry::KeyPointSet& keys = {});

struct SampleOptions {
  std::size_t frames = 16;
  // Feed all mesh points to the backbone instead of the 11 key points.
  bool full_mesh = false;
  dmarker::ExtractOptions extract{};
};

// D-Markers come from the whole raw clip; the backbone input is the pose
// normalized sequence padded or truncated to `frames`.
training::Sample make_sample(const LandmarkSequence& seq, const std::string& id,
                             const SampleOptions& opt = {});

struct BuildFailure {
  std::string path;
  std::string reason;
};

// Rows that fail to load or extract are skipped and listed in `failures`
// (or rethrown when `failures` is null).
training::Dataset build_dataset(const Manifest& m, const SampleOptions& opt = {},
                                std::vector<BuildFailure>* failures = nullptr);

struct SyntheticConfig {
  std::size_t n_videos = 200;
  std::size_t n_subjects = 50;
  std::array<std::size_t, 2> frames_range{16, 48};
  double fps = 25.0;
  double genuine_fraction = 0.5;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  // Phase lengths in frames; neighbouring phases share their boundary frame.
  std::array<std::size_t, 2> onset_range{6, 12};
  std::array<std::size_t, 2> apex_range{3, 8};
  std::array<std::size_t, 2> offset_range{6, 12};
  std::array<std::size_t, 2> lead_range{0, 2};  // neutral frames before onset

  double lip_amplitude = 0.1;    // lip corner excursion, inter-ocular units
  double eye_aperture = 0.06;    // lid center height above the corner chord
  double eye_activation = 0.5;   // fractional aperture decrease for genuine smiles
  double cheek_amplitude = 0.05;
  double posed_residual = 0.3;   // eye and cheek involvement of posed smiles
  double posed_asymmetry = 0.3;  // weaker lip corner of posed smiles
  double subject_jitter = 0.02;
  double max_rotation_deg = 25.0;
  bool full_mesh = false;        // emit 478-point frames

  void validate() const;
};

nlohmann::json to_json(const SyntheticConfig& c);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

struct SyntheticVideo {
  std::string id;
  LandmarkSequence sequence;
  dmarker::SmilePhases phases;
};

std::vector<SyntheticVideo> synth_generate(const SyntheticConfig& cfg);
// Writes <dir>/videos/<id>.json, sidecars and <dir>/manifest.csv.
Manifest synth_write(const SyntheticConfig& cfg, const std::filesystem::path& dir);

training::Dataset build_dataset(const std::vector<SyntheticVideo>& videos,
                                const SampleOptions& opt = {});

}  // namespace smilefusion::data

#endif  // SMILEFUSION_DATA_HPP_
