# Copyright 2026 The SmileFusion Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math

import numpy as np
import pytest

import smilefusion as sf


@pytest.fixture(scope="module")
def videos():
    return sf.synth_generate(n_videos=12, n_subjects=3, seed=2)


def test_extract_dmarker_has_225_values(videos):
    for v in videos:
        z = sf.extract_dmarker(v["frames"], fps=v["fps"])
        assert len(z) == sf.DMARKER_SIZE == 225
        assert all(math.isfinite(x) for x in z)
    assert len(sf.dmarker_feature_names()) == 225


def test_extraction_ignores_similarity_transforms(videos):
    frames = videos[0]["frames"]
    c, s = math.cos(0.4), math.sin(0.4)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    moved = 1.7 * frames @ rot.T + np.array([10.0, -4.0, 2.0])
    a = np.array(sf.extract_dmarker(frames))
    b = np.array(sf.extract_dmarker(moved))
    assert np.allclose(a, b, rtol=1e-6, atol=1e-9)


def test_signals_start_at_one_half(videos):
    sig = sf.region_signals(videos[1]["frames"])
    assert abs(sig["lip"][0] - 0.5) < 1e-12
    assert abs(sig["cheek"][0] - 0.5) < 1e-12


def test_segment_phases():
    p = sf.segment_phases([0, 1, 2, 3, 3, 3, 2, 1, 0])
    assert p == {"onset": (0, 3), "apex": (3, 5), "offset": (5, 8)}
    with pytest.raises(sf.NoPhaseStructure):
        sf.segment_phases([1, 1, 1])


def test_synthetic_phases_match_segmentation(videos):
    for v in videos:
        lip = sf.region_signals(v["frames"])["lip"]
        assert sf.segment_phases(lip) == v["phases"]


def test_phase_features_duration():
    f = sf.phase_features([0.3] * 10, [0.3] * 10, [0.3] * 10, 25.0)
    assert f["duration"] == pytest.approx(0.4)
    assert len(f) == 25


def test_fusion_kinds_and_parameter_counts():
    kinds = sf.fusion_kinds()
    assert len(kinds) == 15
    assert sf.output_width("concat", 128) == 256
    assert sf.parameter_counts("hadamard")["extra"] == 0
    for k in kinds:
        if k not in ("hadamard", "concat", "additive"):
            assert sf.parameter_counts(k)["extra"] > 0
    assert sf.auxiliary_head_parameter_count() == 56024
    with pytest.raises(sf.UnknownKind):
        sf.parameter_counts("hadamrd")


def test_grad_check_single_seed():
    targets = sf.grad_check(seeds=[1])
    assert all(t["passed"] for t in targets)
    assert sum(t["group"] == "fusion" for t in targets) == 15
    faulty = sf.grad_check(seeds=[1], inject_fault=True)
    assert not all(t["passed"] for t in faulty)


def test_crossval_and_cli(tmp_path):
    manifest = sf.synth_write(str(tmp_path / "corpus"), n_videos=24, n_subjects=6, seed=1)
    report = sf.crossval(manifest, fusion="hadamard", folds=3, epochs=30, seed=1)
    assert len(report["folds"]) == 3
    assert report["mean_accuracy"] >= 0.7

    out = tmp_path / "extract"
    code, stdout, _ = sf.run_cli(["extract", "--manifest", manifest, "--out", str(out)])
    assert code == 0
    header = (out / "dmarkers.csv").read_text().splitlines()[0]
    assert len(header.split(",")) == 227
    echoed = json.loads((out / "resolved_config.json").read_text())
    assert echoed["command"] == "extract"

    code, _, err = sf.run_cli(["train", "--manifest", manifest, "--out", str(tmp_path / "t"),
                               "--fusion", "nope"])
    assert code == 1
    assert "factorized-hadamard" in err
