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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "smilefusion/data.hpp"
#include "smilefusion/error.hpp"
#include "support.hpp"

using namespace smilefusion;
using namespace smilefusion::data;
using dmarker::Phase;
using dmarker::Region;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string frame_json(std::size_t points, double v) {
  std::string s = "[";
  for (std::size_t i = 0; i < points; ++i) {
    if (i) s += ",";
    s += "[" + std::to_string(v + i) + ",1,2]";
  }
  return s + "]";
}

LandmarkSequence counting_sequence(std::size_t frames) {
  LandmarkSequence s;
  for (std::size_t t = 0; t < frames; ++t) {
    geometry::LandmarkFrame f;
    for (std::size_t i = 0; i < 11; ++i) f.emplace_back(double(t), double(i), 1.0 + t * i);
    s.frames.push_back(f);
  }
  return s;
}

bool same_sequence(const LandmarkSequence& a, const LandmarkSequence& b) {
  if (a.fps != b.fps || a.label != b.label || a.subject_id != b.subject_id) return false;
  if (a.frames.size() != b.frames.size()) return false;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    if (a.frames[t].size() != b.frames[t].size()) return false;
    for (std::size_t i = 0; i < a.frames[t].size(); ++i)
      if (a.frames[t][i] != b.frames[t][i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("minimal landmark file") {
  const auto dir = sf_test::temp_dir("data_min");
  write_text(dir / "a.json", R"({"schema": "smilefusion-landmarks-v1", "fps": 30, "subject_id": "s1",
    "label": 1, "frames": [)" + frame_json(11, 0) + "," + frame_json(11, 1) + "]}");
  const auto seq = load_landmark_file(dir / "a.json");
  CHECK(seq.frame_count() == 2);
  CHECK(seq.point_count() == 11);
  CHECK(seq.fps == 30.0);
  CHECK(seq.label == 1);
  CHECK(seq.subject_id == "s1");
  CHECK(seq.frames[1][3].x() == 4.0);
  fs::remove_all(dir);
}

TEST_CASE("landmark file errors") {
  const auto dir = sf_test::temp_dir("data_err");
  auto expect_parse = [&](const std::string& body, const std::string& needle) {
    write_text(dir / "bad.json", body);
    try {
      load_landmark_file(dir / "bad.json");
      FAIL("expected ParseError for " << body);
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
    }
  };
  const std::string head = R"({"schema": "smilefusion-landmarks-v1", "fps": 25, "subject_id": "s", )";
  expect_parse(head + R"("label": 0, "frames": [)" + frame_json(11, 0) + "," + frame_json(10, 0) +
                   "]}",
               "frame 1");
  expect_parse(head + R"("label": 3, "frames": []})", "label");
  expect_parse(R"({"schema": "smilefusion-landmarks-v1", "subject_id": "s", "label": 0, "frames": []})",
               "fps");
  expect_parse("{not json", "bad.json");
  expect_parse(head + R"("label": 0, "frames": [[[1,2]]]})", "point 0");

  write_text(dir / "v2.json", R"({"schema": "smilefusion-landmarks-v2", "fps": 25, "subject_id": "s",
    "label": 0, "frames": []})");
  CHECK_THROWS_AS(load_landmark_file(dir / "v2.json"), SchemaVersionMismatch);
  CHECK_THROWS_AS(load_landmark_file(dir / "missing.json"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("landmark round trip is bit-identical") {
  Rng rng(1);
  const auto dir = sf_test::temp_dir("data_rt");
  for (int trial = 0; trial < 10; ++trial) {
    auto seq = sf_test::random_smile(rng, 5 + trial, 0.01);
    for (auto& f : seq.frames) f = geometry::apply_pose(f, sf_test::random_pose(rng));
    seq.subject_id = "subject " + std::to_string(trial);
    seq.label = trial % 2;
    seq.fps = 29.97;
    save_landmark_file(seq, dir / "rt.json");
    CHECK(same_sequence(seq, load_landmark_file(dir / "rt.json")));
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest and sidecar files") {
  const auto dir = sf_test::temp_dir("data_manifest");
  Manifest m;
  m.rows = {{"videos/a.json", "s1", 1, 25.0}, {"videos/b.json", "s2", 0, 30.0}};
  save_manifest(m, dir / "manifest.csv");
  const auto back = load_manifest(dir / "manifest.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].path == "videos/b.json");
  CHECK(back.rows[1].fps == 30.0);
  CHECK(back.resolve(back.rows[0]) == dir / "videos/a.json");

  write_text(dir / "bad.csv", "file,subject,label,fps\nx,s,0,25\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad.csv"), ParseError);
  write_text(dir / "bad2.csv", "path,subject_id,label,fps\nx,s,zero,25\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad2.csv"), ParseError);
  write_text(dir / "dup.csv", "path,subject_id,label,fps\nx,s,0,25\nx,t,1,25\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.csv"), ParseError);
  Manifest dup;
  dup.rows = {{"x", "s", 0, 25.0}, {"x", "t", 1, 25.0}};
  CHECK_THROWS_AS(dup.validate(), InvalidArgument);

  dmarker::SmilePhases p{{0, 4}, {4, 6}, {6, 9}};
  save_sidecar(p, dir / "a.phases.json");
  CHECK(load_sidecar(dir / "a.phases.json") == p);
  CHECK(phases_to_json(p) == nlohmann::json::parse(R"({"onset":[0,4],"apex":[4,6],"offset":[6,9]})"));
  CHECK(sidecar_path("videos/a.json") == fs::path("videos/a.phases.json"));
  fs::remove_all(dir);
}

TEST_CASE("pad_truncate") {
  const auto seq = counting_sequence(10);
  const auto same = pad_truncate(seq, 10);
  CHECK(same.shape() == ad::Shape{10, 11, 3});
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t i = 0; i < 11; ++i)
      for (int c = 0; c < 3; ++c) CHECK(same[(t * 11 + i) * 3 + c] == seq.frames[t][i][c]);

  const auto cut = pad_truncate(seq, 4);
  CHECK(cut.shape() == ad::Shape{4, 11, 3});
  for (std::size_t k = 0; k < cut.size(); ++k) CHECK(cut[k] == same[k]);

  const auto padded = pad_truncate(counting_sequence(3), 5);
  for (std::size_t k = 0; k < padded.size(); ++k) {
    if (k < 3 * 33) CHECK(padded[k] == same[k]);
    else CHECK(padded[k] == 0.0);
  }
  CHECK_THROWS_AS(pad_truncate(seq, 0), InvalidArgument);
}

TEST_CASE("samples use the raw clip for D-Markers") {
  Rng rng(2);
  auto seq = sf_test::random_smile(rng, 30, 0.0);
  const auto s = make_sample(seq, "v");
  CHECK(s.frames.shape() == ad::Shape{16, 11, 3});
  CHECK(s.dmarker == dmarker::extract_dmarker(seq));
  const auto norm = geometry::normalize_sequence(seq);
  for (std::size_t i = 0; i < 11; ++i)
    CHECK(s.frames[(5 * 11 + i) * 3 + 1] == doctest::Approx(norm.frames[5][i].y()).epsilon(1e-15));
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig c;
  c.genuine_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SyntheticConfig();
  c.noise_std = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SyntheticConfig();
  CHECK(to_json(synthetic_config_from_json(to_json(c))) == to_json(c));
}

TEST_CASE("synthetic corpus is deterministic and labelled as asked") {
  SyntheticConfig c;
  c.n_videos = 30;
  c.n_subjects = 7;
  c.noise_std = 0.01;
  c.seed = 4;
  const auto a = synth_generate(c);
  const auto b = synth_generate(c);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(same_sequence(a[i].sequence, b[i].sequence));
  }
  c.seed = 5;
  CHECK(!same_sequence(a[0].sequence, synth_generate(c)[0].sequence));

  std::size_t genuine = 0;
  std::set<std::string> subjects;
  for (const auto& v : a) {
    genuine += v.sequence.label;
    subjects.insert(v.sequence.subject_id);
    CHECK(v.sequence.frame_count() >= 16);
    CHECK(v.sequence.frame_count() <= 48);
  }
  CHECK(genuine == 15);
  CHECK(subjects.size() == 7);

  c.genuine_fraction = 1.0;
  for (const auto& v : synth_generate(c)) CHECK(v.sequence.label == 1);
  c.genuine_fraction = 0.0;
  for (const auto& v : synth_generate(c)) CHECK(v.sequence.label == 0);

  c.full_mesh = true;
  c.n_videos = 2;
  for (const auto& v : synth_generate(c)) CHECK(v.sequence.point_count() == 478);
}

TEST_CASE("sidecar phases match segmentation of clean lip signals") {
  SyntheticConfig c;
  c.seed = 9;
  std::size_t mismatches = 0;
  for (const auto& v : synth_generate(c)) {
    const auto lip = dmarker::lip_signal(geometry::normalize_sequence(v.sequence));
    if (!(dmarker::segment_phases(lip.values) == v.phases)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("clean corpus is separable on the eye apex amplitude") {
  SyntheticConfig c;
  c.seed = 1;
  const auto data = build_dataset(synth_generate(c));
  const std::size_t k = dmarker::dmarker_index(Region::Eye, Phase::Apex, dmarker::kMaxAmplitude);
  std::vector<double> cls[2];
  for (const auto& s : data) cls[s.label].push_back(s.dmarker[k]);
  auto stats = [](const std::vector<double>& v) {
    double mu = 0.0, var = 0.0;
    for (double x : v) mu += x;
    mu /= double(v.size());
    for (double x : v) var += (x - mu) * (x - mu);
    return std::make_pair(mu, std::sqrt(var / double(v.size())));
  };
  const auto [m0, s0] = stats(cls[0]);
  const auto [m1, s1] = stats(cls[1]);
  const double lo_posed = *std::min_element(cls[0].begin(), cls[0].end());
  const double hi_genuine = *std::max_element(cls[1].begin(), cls[1].end());
  CHECK(lo_posed > hi_genuine);
  CHECK(std::fabs(m0 - m1) > 10.0 * std::max(s0, s1));

  // Logistic probe on the standardized full vector.
  const std::size_t n = data.size(), d = dmarker::kDMarkerSize;
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& s : data)
    for (std::size_t j = 0; j < d; ++j) mu[j] += s.dmarker[j] / double(n);
  for (const auto& s : data)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(s.dmarker[j] - mu[j], 2) / double(n);
  for (double& v : sd) v = v > 1e-24 ? std::sqrt(v) : 1.0;
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (const auto& s : data) {
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * (s.dmarker[j] - mu[j]) / sd[j];
      const double err = 1.0 / (1.0 + std::exp(-z)) - s.label;
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * (s.dmarker[j] - mu[j]) / sd[j];
      gb += err;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= 0.1 * gw[j] / double(n);
    b -= 0.1 * gb / double(n);
  }
  std::size_t correct = 0;
  for (const auto& s : data) {
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += w[j] * (s.dmarker[j] - mu[j]) / sd[j];
    correct += (z > 0) == (s.label == 1);
  }
  CHECK(correct == n);
}

TEST_CASE("synthetic corpus on disk builds the same dataset") {
  SyntheticConfig c;
  c.n_videos = 12;
  c.n_subjects = 4;
  c.seed = 3;
  const auto dir = sf_test::temp_dir("data_synth");
  const auto m = synth_write(c, dir);
  CHECK(fs::exists(dir / "manifest.csv"));
  const auto from_disk = build_dataset(load_manifest(dir / "manifest.csv"));
  const auto in_memory = build_dataset(synth_generate(c));
  REQUIRE(from_disk.size() == in_memory.size());
  for (std::size_t i = 0; i < from_disk.size(); ++i) {
    CHECK(from_disk[i].dmarker == in_memory[i].dmarker);
    CHECK(from_disk[i].subject_id == in_memory[i].subject_id);
    CHECK(from_disk[i].label == in_memory[i].label);
  }
  for (const auto& row : m.rows) {
    const auto file = m.resolve(row);
    CHECK(fs::exists(sidecar_path(file)));
  }

  write_text(dir / "videos/broken.json", "{}");
  auto with_bad = load_manifest(dir / "manifest.csv");
  with_bad.rows.push_back({"videos/broken.json", "s9", 0, 25.0});
  std::vector<BuildFailure> failures;
  const auto partial = build_dataset(with_bad, {}, &failures);
  CHECK(partial.size() == 12);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].path.find("broken.json") != std::string::npos);
  CHECK_THROWS_AS(build_dataset(with_bad), ParseError);
  fs::remove_all(dir);
}
