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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "smilefusion/cli.hpp"
#include "smilefusion/data.hpp"
#include "smilefusion/dmarker.hpp"
#include "smilefusion/error.hpp"
#include "smilefusion/fusion.hpp"
#include "smilefusion/grad_suite.hpp"
#include "smilefusion/model.hpp"
#include "smilefusion/training.hpp"

namespace py = pybind11;
using namespace smilefusion;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

geometry::LandmarkSequence to_sequence(const Array& frames, double fps) {
  if (frames.ndim() != 3 || frames.shape(2) != 3) {
    throw InvalidArgument("frames must have shape (T, P, 3)");
  }
  auto r = frames.unchecked<3>();
  geometry::LandmarkSequence seq;
  seq.fps = fps;
  for (py::ssize_t t = 0; t < r.shape(0); ++t) {
    geometry::LandmarkFrame f;
    for (py::ssize_t i = 0; i < r.shape(1); ++i) f.emplace_back(r(t, i, 0), r(t, i, 1), r(t, i, 2));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

Array to_array(const geometry::LandmarkSequence& seq) {
  const py::ssize_t t = py::ssize_t(seq.frame_count()), p = py::ssize_t(seq.point_count());
  Array out({t, p, py::ssize_t(3)});
  auto w = out.mutable_unchecked<3>();
  for (py::ssize_t i = 0; i < t; ++i)
    for (py::ssize_t j = 0; j < p; ++j)
      for (int c = 0; c < 3; ++c) w(i, j, c) = seq.frames[i][j][c];
  return out;
}

py::dict phases_dict(const dmarker::SmilePhases& p) {
  py::dict d;
  d["onset"] = py::make_tuple(p.onset.first, p.onset.last);
  d["apex"] = py::make_tuple(p.apex.first, p.apex.last);
  d["offset"] = py::make_tuple(p.offset.first, p.offset.last);
  return d;
}

data::SyntheticConfig synthetic_config(const py::dict& kw) {
  nlohmann::json j = data::to_json(data::SyntheticConfig{});
  for (auto item : kw) {
    const std::string key = py::str(item.first);
    if (!j.contains(key)) throw InvalidArgument("unknown synthetic option: " + key);
    j[key] = nlohmann::json::parse(py::str(py::module_::import("json").attr("dumps")(item.second))
                                       .cast<std::string>());
  }
  return data::synthetic_config_from_json(j);
}

model::BackboneConfig preset(const std::string& name) {
  if (name == "paper") return model::BackboneConfig::paper();
  if (name == "paper-long") return model::BackboneConfig::paper_long();
  if (name == "desk") return model::BackboneConfig::desk();
  throw InvalidArgument("unknown preset " + name + " (paper, paper-long, desk)");
}

std::optional<fusion::FusionKind> kind_of(const std::string& name) {
  if (name == "none") return std::nullopt;
  return fusion::parse_fusion_kind(name);
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Genuine vs posed smile classification with D-Marker fusion";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<UnknownKind>(m, "UnknownKind", PyExc_ValueError);
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", PyExc_ValueError);
  py::register_exception<NoPhaseStructure>(m, "NoPhaseStructure", PyExc_ValueError);
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", PyExc_ValueError);
  py::register_exception<TooFewSubjects>(m, "TooFewSubjects", PyExc_ValueError);
  py::register_exception<EmptyClass>(m, "EmptyClass", PyExc_ValueError);

  m.attr("DMARKER_SIZE") = dmarker::kDMarkerSize;

  m.def(
      "extract_dmarker",
      [](const Array& frames, double fps, bool smooth) {
        dmarker::ExtractOptions opt;
        opt.smooth = smooth;
        const auto z = dmarker::extract_dmarker(to_sequence(frames, fps), opt);
        return std::vector<double>(z.begin(), z.end());
      },
      py::arg("frames"), py::arg("fps") = 25.0, py::arg("smooth") = false,
      "225 D-Marker features of a (T, P, 3) landmark sequence.");
  m.def("dmarker_feature_names", &dmarker::dmarker_feature_names);
  m.def(
      "region_signals",
      [](const Array& frames, double fps) {
        const auto norm = geometry::normalize_sequence(to_sequence(frames, fps));
        py::dict d;
        d["lip"] = dmarker::lip_signal(norm).values;
        d["eye"] = dmarker::eye_signal(norm).values;
        d["cheek"] = dmarker::cheek_signal(norm).values;
        return d;
      },
      py::arg("frames"), py::arg("fps") = 25.0);
  m.def(
      "segment_phases",
      [](const std::vector<double>& signal) { return phases_dict(dmarker::segment_phases(signal)); },
      py::arg("signal"));
  m.def(
      "phase_features",
      [](const std::vector<double>& d, const std::vector<double>& left,
         const std::vector<double>& right, double fps) {
        const auto f = dmarker::phase_features(d, left, right, fps);
        py::dict out;
        for (std::size_t k = 0; k < f.size(); ++k)
          out[py::str(std::string(dmarker::phase_feature_names()[k]))] = f[k];
        return out;
      },
      py::arg("segment"), py::arg("left"), py::arg("right"), py::arg("fps"));

  m.def(
      "synth_generate",
      [](py::kwargs kw) {
        py::list out;
        for (const auto& v : data::synth_generate(synthetic_config(kw))) {
          py::dict d;
          d["id"] = v.id;
          d["subject_id"] = v.sequence.subject_id;
          d["label"] = v.sequence.label;
          d["fps"] = v.sequence.fps;
          d["frames"] = to_array(v.sequence);
          d["phases"] = phases_dict(v.phases);
          out.append(d);
        }
        return out;
      },
      "Synthetic smiles; keyword arguments override SyntheticConfig fields.");
  m.def(
      "synth_write",
      [](const std::string& dir, py::kwargs kw) {
        data::synth_write(synthetic_config(kw), dir);
        return dir + "/manifest.csv";
      },
      py::arg("out"));

  m.def("fusion_kinds", [] {
    std::vector<std::string> names;
    for (auto k : fusion::all_fusion_kinds()) names.emplace_back(fusion::fusion_name(k));
    return names;
  });
  m.def(
      "output_width",
      [](const std::string& kind, std::size_t q) {
        return fusion::output_width(fusion::parse_fusion_kind(kind), q);
      },
      py::arg("kind"), py::arg("width") = 128);
  m.def(
      "parameter_counts",
      [](const std::string& fusion, const std::string& preset_name, std::size_t width) {
        const auto cfg = model::ModelConfig::make(preset(preset_name), kind_of(fusion), width);
        py::dict d;
        d["backbone"] = model::backbone_parameter_count(cfg.backbone);
        d["projection"] = fusion::projection_parameter_count(cfg.fusion);
        d["extra"] = fusion::extra_parameter_count(cfg.fusion);
        const std::size_t fused =
            cfg.fusion.kind ? fusion::output_width(*cfg.fusion.kind, width) : width;
        d["head"] = model::head_parameter_count(fused);
        d["total"] = model::expected_parameter_count(cfg);
        return d;
      },
      py::arg("fusion") = "hadamard", py::arg("preset") = "paper", py::arg("width") = 128);
  m.def("auxiliary_head_parameter_count", &model::auxiliary_head_parameter_count,
        py::arg("inputs") = 256, py::arg("outputs") = 216);

  m.def(
      "crossval",
      [](const std::string& manifest, const std::string& fusion, std::size_t folds,
         std::size_t epochs, std::uint64_t seed, const std::string& preset_name, std::size_t width,
         const std::string& inference_mode) {
        const auto cfg = model::ModelConfig::make(preset(preset_name), kind_of(fusion), width,
                                                  model::parse_inference_mode(inference_mode));
        training::TrainConfig t;
        t.epochs = epochs;
        t.seed = seed;
        data::SampleOptions opt;
        opt.frames = cfg.backbone.frames;
        const auto ds = data::build_dataset(data::load_manifest(manifest), opt);
        py::gil_scoped_release release;
        const auto r = training::crossval(ds, cfg, t, folds);
        py::gil_scoped_acquire acquire;
        return to_python(training::crossval_report(r, {{"fusion", fusion}, {"epochs", epochs}}));
      },
      py::arg("manifest"), py::arg("fusion") = "hadamard", py::arg("folds") = 5,
      py::arg("epochs") = 300, py::arg("seed") = 0, py::arg("preset") = "desk",
      py::arg("width") = 32, py::arg("inference_mode") = "strict");

  m.def(
      "grad_check",
      [](std::vector<std::uint64_t> seeds, bool inject_fault) {
        GradSuiteOptions opt;
        opt.seeds = std::move(seeds);
        opt.inject_fault = inject_fault;
        std::vector<GradTarget> targets;
        {
          py::gil_scoped_release release;
          targets = run_grad_suite(opt);
        }
        py::list out;
        for (const auto& t : targets) {
          py::dict d;
          d["group"] = t.group;
          d["name"] = t.name;
          d["max_rel_error"] = t.max_rel_error;
          d["entries"] = t.entries;
          d["passed"] = t.passed();
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3, 4, 5},
      py::arg("inject_fault") = false);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "smilefusion");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(int(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a smilefusion subcommand; returns (exit_code, stdout, stderr).");
}
