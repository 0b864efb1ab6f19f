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

#include "smilefusion/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "smilefusion/error.hpp"
#include "smilefusion/init.hpp"

namespace smilefusion::data {

using geometry::LandmarkFrame;
using geometry::Point3;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

nlohmann::json landmarks_to_json(const LandmarkSequence& seq) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : seq.frames) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : f) pts.push_back({p.x(), p.y(), p.z()});
    frames.push_back(std::move(pts));
  }
  return {{"schema", kLandmarkSchema},
          {"fps", seq.fps},
          {"subject_id", seq.subject_id},
          {"label", seq.label},
          {"frames", std::move(frames)}};
}

LandmarkSequence landmarks_from_json(const nlohmann::json& j, const std::string& context) {
  const std::string where = context.empty() ? "landmarks" : context;
  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(where + ": " + msg); };
  if (!j.is_object()) throw fail("top level must be an object");
  if (!j.contains("schema") || !j["schema"].is_string()) throw fail("missing field 'schema'");
  if (j["schema"].get<std::string>() != kLandmarkSchema) {
    throw SchemaVersionMismatch(where + ": schema '" + j["schema"].get<std::string>() +
                                "', expected '" + std::string(kLandmarkSchema) + "'");
  }
  LandmarkSequence seq;
  if (!j.contains("fps") || !j["fps"].is_number()) throw fail("field 'fps' must be a number");
  seq.fps = j["fps"].get<double>();
  if (!j.contains("subject_id") || !j["subject_id"].is_string()) {
    throw fail("field 'subject_id' must be a string");
  }
  seq.subject_id = j["subject_id"].get<std::string>();
  if (!j.contains("label") || !j["label"].is_number_integer()) {
    throw fail("field 'label' must be 0 or 1");
  }
  seq.label = j["label"].get<int>();
  if (seq.label != 0 && seq.label != 1) throw fail("field 'label' must be 0 or 1");
  if (!(seq.fps > 0.0)) throw fail("field 'fps' must be positive");
  if (!j.contains("frames") || !j["frames"].is_array()) throw fail("field 'frames' must be an array");

  const auto& frames = j["frames"];
  std::size_t points = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const std::string at = "frame " + std::to_string(t);
    if (!f.is_array()) throw fail(at + " is not an array");
    if (t == 0) points = f.size();
    if (f.size() != points) {
      throw fail(at + " has " + std::to_string(f.size()) + " points, frame 0 has " +
                 std::to_string(points));
    }
    LandmarkFrame frame;
    frame.reserve(points);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto& p = f[i];
      if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
          !p[2].is_number()) {
        throw fail(at + " point " + std::to_string(i) + " is not [x, y, z]");
      }
      frame.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    seq.frames.push_back(std::move(frame));
  }
  try {
    seq.validate();
  } catch (const InvalidArgument& e) {
    throw fail(e.what());
  }
  return seq;
}

LandmarkSequence load_landmark_file(const fs::path& path) {
  return landmarks_from_json(read_json(path), path.string());
}

void save_landmark_file(const LandmarkSequence& seq, const fs::path& path) {
  write_text(path, landmarks_to_json(seq).dump() + "\n");
}

void Manifest::validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string at = "manifest row " + std::to_string(i + 1);
    if (r.path.empty()) throw InvalidArgument(at + ": empty path");
    if (!seen.insert(r.path).second) throw InvalidArgument(at + ": duplicate path " + r.path);
    if (r.label != 0 && r.label != 1) throw InvalidArgument(at + ": label must be 0 or 1");
    if (!(r.fps > 0.0)) throw InvalidArgument(at + ": fps must be positive");
    if (r.subject_id.empty()) throw InvalidArgument(at + ": empty subject_id");
  }
}

fs::path Manifest::resolve(const ManifestRow& row) const {
  const fs::path p(row.path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string at = path.string() + ":" + std::to_string(line_no);
    if (!header) {
      if (cells != std::vector<std::string>{"path", "subject_id", "label", "fps"}) {
        throw ParseError(at + ": header must be path,subject_id,label,fps");
      }
      header = true;
      continue;
    }
    if (cells.size() != 4) throw ParseError(at + ": expected 4 columns");
    ManifestRow r;
    r.path = cells[0];
    r.subject_id = cells[1];
    try {
      std::size_t used = 0;
      r.label = std::stoi(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("label");
      r.fps = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("fps");
    } catch (const std::logic_error&) {
      throw ParseError(at + ": label/fps are not numbers");
    }
    m.rows.push_back(std::move(r));
  }
  if (!header) throw ParseError(path.string() + ": empty manifest");
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  m.validate();
  std::ostringstream out;
  out.precision(17);
  out << "path,subject_id,label,fps\n";
  for (const auto& r : m.rows) out << r.path << ',' << r.subject_id << ',' << r.label << ',' << r.fps << '\n';
  write_text(path, out.str());
}

nlohmann::json phases_to_json(const dmarker::SmilePhases& p) {
  return {{"onset", {p.onset.first, p.onset.last}},
          {"apex", {p.apex.first, p.apex.last}},
          {"offset", {p.offset.first, p.offset.last}}};
}

dmarker::SmilePhases phases_from_json(const nlohmann::json& j) {
  auto span = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2) {
      throw ParseError(std::string("sidecar field '") + key + "' must be [start, end]");
    }
    return dmarker::PhaseSpan{j[key][0].get<std::size_t>(), j[key][1].get<std::size_t>()};
  };
  return {span("onset"), span("apex"), span("offset")};
}

void save_sidecar(const dmarker::SmilePhases& p, const fs::path& path) {
  write_text(path, phases_to_json(p).dump() + "\n");
}

dmarker::SmilePhases load_sidecar(const fs::path& path) { return phases_from_json(read_json(path)); }

fs::path sidecar_path(const fs::path& landmark_file) {
  fs::path p = landmark_file;
  p.replace_extension(".phases.json");
  return p;
}

ad::Tensor pad_truncate(const LandmarkSequence& seq, std::size_t frames) {
  if (frames < 1) throw InvalidArgument("pad_truncate needs T >= 1");
  const std::size_t points = seq.point_count();
  ad::Tensor out({frames, points, 3}, 0.0);
  const std::size_t keep = std::min(frames, seq.frames.size());
  for (std::size_t t = 0; t < keep; ++t) {
    const auto& f = seq.frames[t];
    if (f.size() != points) throw ShapeMismatch("ragged frame " + std::to_string(t));
    for (std::size_t i = 0; i < points; ++i) {
      for (int c = 0; c < 3; ++c) out[(t * points + i) * 3 + c] = f[i][c];
    }
  }
  return out;
}

LandmarkSequence normalize_all_points(const LandmarkSequence& seq,
                                      const geometry::KeyPointSet& keys) {
  LandmarkSequence out = seq;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    try {
      const auto pose = geometry::estimate_pose(
          seq.point_count() == geometry::kKeyPointCount ? seq.frames[t]
                                                        : geometry::select_keypoints(seq.frames[t], keys));
      out.frames[t] = geometry::normalize_frame(seq.frames[t], pose);
    } catch (const DegenerateGeometry& e) {
      throw DegenerateGeometry("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

training::Sample make_sample(const LandmarkSequence& seq, const std::string& id,
                             const SampleOptions& opt) {
  training::Sample s;
  s.id = id;
  s.subject_id = seq.subject_id;
  s.label = seq.label;
  s.dmarker = dmarker::extract_dmarker(seq, opt.extract);
  const LandmarkSequence norm = opt.full_mesh
                                    ? normalize_all_points(seq, opt.extract.keypoints)
                                    : geometry::normalize_sequence(seq, opt.extract.keypoints);
  s.frames = pad_truncate(norm, opt.frames);
  return s;
}

training::Dataset build_dataset(const Manifest& m, const SampleOptions& opt,
                                std::vector<BuildFailure>* failures) {
  m.validate();
  training::Dataset out;
  for (const auto& row : m.rows) {
    try {
      LandmarkSequence seq = load_landmark_file(m.resolve(row));
      seq.subject_id = row.subject_id;
      seq.label = row.label;
      seq.fps = row.fps;
      out.push_back(make_sample(seq, row.path, opt));
    } catch (const Error& e) {
      if (!failures) throw;
      failures->push_back({row.path, e.what()});
    }
  }
  return out;
}

// ---- synthetic corpus ---------------------------------------------------------

void SyntheticConfig::validate() const {
  auto range_ok = [](const std::array<std::size_t, 2>& r) { return r[0] <= r[1]; };
  if (n_videos < 1) throw InvalidArgument("n_videos must be at least 1");
  if (n_subjects < 1) throw InvalidArgument("n_subjects must be at least 1");
  if (!(genuine_fraction >= 0.0 && genuine_fraction <= 1.0)) {
    throw InvalidArgument("genuine_fraction must lie in [0, 1]");
  }
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  for (const auto* r : {&frames_range, &onset_range, &apex_range, &offset_range, &lead_range}) {
    if (!range_ok(*r)) throw InvalidArgument("synthetic ranges must satisfy min <= max");
  }
  if (onset_range[0] < 2 || offset_range[0] < 2 || apex_range[0] < 1) {
    throw InvalidArgument("onset/offset need >= 2 frames and apex >= 1");
  }
  const std::size_t longest = lead_range[1] + onset_range[1] + apex_range[1] + offset_range[1] - 2;
  if (longest > frames_range[1]) {
    throw InvalidArgument("frames_range max " + std::to_string(frames_range[1]) +
                          " is shorter than the longest smile (" + std::to_string(longest) + ")");
  }
  if (frames_range[0] < 3) throw InvalidArgument("frames_range min must be at least 3");
  if (!(posed_residual >= 0.0 && posed_asymmetry >= 0.0 && posed_asymmetry < 1.0)) {
    throw InvalidArgument("posed residual must be >= 0 and asymmetry in [0, 1)");
  }
  if (!(eye_activation >= 0.0 && eye_activation < 1.0)) {
    throw InvalidArgument("eye_activation must lie in [0, 1)");
  }
}

nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"n_videos", c.n_videos},
          {"n_subjects", c.n_subjects},
          {"frames_range", c.frames_range},
          {"fps", c.fps},
          {"genuine_fraction", c.genuine_fraction},
          {"noise_std", c.noise_std},
          {"seed", c.seed},
          {"onset_range", c.onset_range},
          {"apex_range", c.apex_range},
          {"offset_range", c.offset_range},
          {"lead_range", c.lead_range},
          {"lip_amplitude", c.lip_amplitude},
          {"eye_aperture", c.eye_aperture},
          {"eye_activation", c.eye_activation},
          {"cheek_amplitude", c.cheek_amplitude},
          {"posed_residual", c.posed_residual},
          {"posed_asymmetry", c.posed_asymmetry},
          {"subject_jitter", c.subject_jitter},
          {"max_rotation_deg", c.max_rotation_deg},
          {"full_mesh", c.full_mesh}};
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
#define SF_FIELD(name) c.name = j.value(#name, c.name)
    SF_FIELD(n_videos);
    SF_FIELD(n_subjects);
    SF_FIELD(frames_range);
    SF_FIELD(fps);
    SF_FIELD(genuine_fraction);
    SF_FIELD(noise_std);
    SF_FIELD(seed);
    SF_FIELD(onset_range);
    SF_FIELD(apex_range);
    SF_FIELD(offset_range);
    SF_FIELD(lead_range);
    SF_FIELD(lip_amplitude);
    SF_FIELD(eye_aperture);
    SF_FIELD(eye_activation);
    SF_FIELD(cheek_amplitude);
    SF_FIELD(posed_residual);
    SF_FIELD(posed_asymmetry);
    SF_FIELD(subject_jitter);
    SF_FIELD(max_rotation_deg);
    SF_FIELD(full_mesh);
#undef SF_FIELD
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

// Neutral face in inter-ocular units: x towards the subject's left eye, y up,
// z out of the face, nose tip at the origin.
const std::array<Point3, geometry::kKeyPointCount> kNeutral{
    Point3(-0.50, 0.35, 0.00),  Point3(-0.34, 0.35, 0.03),  Point3(-0.18, 0.35, 0.02),
    Point3(0.18, 0.35, 0.02),   Point3(0.34, 0.35, 0.03),   Point3(0.50, 0.35, 0.00),
    Point3(-0.38, 0.02, 0.06),  Point3(0.38, 0.02, 0.06),   Point3(0.00, 0.00, 0.30),
    Point3(-0.25, -0.35, 0.10), Point3(0.25, -0.35, 0.10),
};

struct Subject {
  std::array<Point3, geometry::kKeyPointCount> face;
  double aperture;
  double gain;
  std::vector<Point3> mesh;  // full-mesh filler points
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_size(Rng& rng, const std::array<std::size_t, 2>& r) {
  return std::uniform_int_distribution<std::size_t>(r[0], r[1])(rng);
}

Subject make_subject(const SyntheticConfig& cfg, std::size_t s) {
  Rng rng(ad::splitmix64(cfg.seed ^ ad::splitmix64(0x5b1ec7000ULL + s)));
  Subject sub;
  const double j = cfg.subject_jitter;
  for (std::size_t i = 0; i < kNeutral.size(); ++i) {
    sub.face[i] = kNeutral[i];
    sub.face[i].x() *= 1.0 + uniform(rng, -j, j);
    sub.face[i].y() *= 1.0 + uniform(rng, -j, j);
  }
  // Eye corners share one height so the lid centers start at a known aperture.
  for (std::size_t i : {0, 2, 3, 5}) sub.face[i].y() = sub.face[0].y();
  sub.aperture = cfg.eye_aperture * (1.0 + uniform(rng, -j, j));
  sub.gain = 1.0 + uniform(rng, -j, j);
  sub.face[1].y() = sub.face[0].y() + sub.aperture;
  sub.face[4].y() = sub.face[0].y() + sub.aperture;
  if (cfg.full_mesh) {
    sub.mesh.resize(geometry::kFullMeshPointCount);
    for (auto& p : sub.mesh) {
      p = Point3(uniform(rng, -0.6, 0.6), uniform(rng, -0.7, 0.6), uniform(rng, -0.1, 0.3));
    }
  }
  return sub;
}

// Trapezoid intensity in [0, 1] per frame.
std::vector<double> smile_profile(std::size_t total, std::size_t lead, std::size_t on,
                                  std::size_t apex, std::size_t off) {
  std::vector<double> s(total, 0.0);
  const std::size_t on_end = lead + on - 1;
  const std::size_t apex_end = on_end + apex - 1;
  for (std::size_t i = 0; i < on; ++i) s[lead + i] = static_cast<double>(i) / static_cast<double>(on - 1);
  for (std::size_t t = on_end; t <= apex_end; ++t) s[t] = 1.0;
  for (std::size_t i = 0; i < off; ++i) {
    s[apex_end + i] = 1.0 - static_cast<double>(i) / static_cast<double>(off - 1);
  }
  return s;
}

}  // namespace

std::vector<SyntheticVideo> synth_generate(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<Subject> subjects;
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) subjects.push_back(make_subject(cfg, s));

  const auto n_genuine = static_cast<std::size_t>(
      std::llround(cfg.genuine_fraction * static_cast<double>(cfg.n_videos)));
  std::vector<int> labels(cfg.n_videos, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_genuine), 1);
  Rng label_rng(ad::splitmix64(cfg.seed ^ 0x1abe1ULL));
  std::shuffle(labels.begin(), labels.end(), label_rng);

  const double deg = std::numbers::pi / 180.0;
  std::vector<SyntheticVideo> out;
  out.reserve(cfg.n_videos);
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    Rng rng(ad::splitmix64(cfg.seed ^ ad::splitmix64(0x0f1de0000ULL + v)));
    const Subject& sub = subjects[v % cfg.n_subjects];
    const bool genuine = labels[v] == 1;

    const std::size_t lead = uniform_size(rng, cfg.lead_range);
    const std::size_t on = uniform_size(rng, cfg.onset_range);
    const std::size_t apex = uniform_size(rng, cfg.apex_range);
    const std::size_t off = uniform_size(rng, cfg.offset_range);
    const std::size_t core = lead + on + apex + off - 2;
    const std::size_t tail_min = cfg.frames_range[0] > core ? cfg.frames_range[0] - core : 0;
    const std::size_t tail = uniform_size(rng, {tail_min, std::max(tail_min, std::min(tail_min + 4, cfg.frames_range[1] - core))});
    const std::size_t total = core + tail;
    const std::vector<double> s = smile_profile(total, lead, on, apex, off);

    const double variation = 1.0 + uniform(rng, -cfg.subject_jitter, cfg.subject_jitter);
    const double involvement = genuine ? 1.0 : cfg.posed_residual;
    const double eye_drop = cfg.eye_activation * involvement * sub.gain * variation;
    const double cheek = cfg.cheek_amplitude * involvement * sub.gain * variation;
    const double lip = cfg.lip_amplitude * sub.gain * variation;
    double lip_right = 1.0, lip_left = 1.0;
    if (!genuine) (uniform(rng, 0.0, 1.0) < 0.5 ? lip_right : lip_left) = 1.0 - cfg.posed_asymmetry;

    geometry::RigidPose pose;
    const double a = cfg.max_rotation_deg * deg;
    pose.rotation = geometry::rotation_from_euler(uniform(rng, -a, a), uniform(rng, -a, a),
                                                  uniform(rng, -a, a));
    pose.scale = uniform(rng, 60.0, 140.0);
    pose.translation = Point3(uniform(rng, 100.0, 500.0), uniform(rng, 100.0, 400.0),
                              uniform(rng, -50.0, 50.0));

    std::normal_distribution<double> noise(0.0, 1.0);
    SyntheticVideo video;
    char id[32];
    std::snprintf(id, sizeof id, "v%04zu", v);
    video.id = id;
    video.sequence.fps = cfg.fps;
    video.sequence.label = labels[v];
    char sid[32];
    std::snprintf(sid, sizeof sid, "s%03zu", v % cfg.n_subjects);
    video.sequence.subject_id = sid;

    for (std::size_t t = 0; t < total; ++t) {
      std::array<Point3, geometry::kKeyPointCount> f = sub.face;
      const double st = s[t];
      const double lid = sub.aperture * eye_drop * st;
      f[geometry::kRightEyeCenter].y() -= lid;
      f[geometry::kLeftEyeCenter].y() -= lid;
      f[geometry::kRightCheek] += Point3(-0.3 * cheek * st, cheek * st, 0.0);
      f[geometry::kLeftCheek] += Point3(0.3 * cheek * st, cheek * st, 0.0);
      f[geometry::kRightLipCorner] += lip * lip_right * st * Point3(-0.8, 0.6, 0.0);
      f[geometry::kLeftLipCorner] += lip * lip_left * st * Point3(0.8, 0.6, 0.0);
      if (cfg.noise_std > 0.0) {
        for (auto& p : f) p += cfg.noise_std * Point3(noise(rng), noise(rng), noise(rng));
      }

      LandmarkFrame frame;
      if (cfg.full_mesh) {
        frame = sub.mesh;
        const geometry::KeyPointSet keys;
        for (std::size_t k = 0; k < f.size(); ++k) frame[keys.indices[k]] = f[k];
      } else {
        frame.assign(f.begin(), f.end());
      }
      video.sequence.frames.push_back(geometry::apply_pose(frame, pose));
    }
    const std::size_t on_end = lead + on - 1;
    const std::size_t apex_end = on_end + apex - 1;
    video.phases.onset = {lead, on_end};
    video.phases.apex = {on_end, apex_end};
    video.phases.offset = {apex_end, apex_end + off - 1};
    out.push_back(std::move(video));
  }
  return out;
}

Manifest synth_write(const SyntheticConfig& cfg, const fs::path& dir) {
  const auto videos = synth_generate(cfg);
  std::error_code ec;
  fs::create_directories(dir / "videos", ec);
  if (ec) throw IoError("cannot create " + (dir / "videos").string() + ": " + ec.message());
  Manifest m;
  m.base_dir = dir;
  for (const auto& v : videos) {
    const fs::path rel = fs::path("videos") / (v.id + ".json");
    save_landmark_file(v.sequence, dir / rel);
    save_sidecar(v.phases, sidecar_path(dir / rel));
    m.rows.push_back({rel.generic_string(), v.sequence.subject_id, v.sequence.label, v.sequence.fps});
  }
  save_manifest(m, dir / "manifest.csv");
  return m;
}

training::Dataset build_dataset(const std::vector<SyntheticVideo>& videos,
                                const SampleOptions& opt) {
  training::Dataset out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(make_sample(v.sequence, v.id, opt));
  return out;
}

}  // namespace smilefusion::data
