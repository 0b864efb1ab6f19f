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

"""Genuine vs posed smile classification with D-Marker fusion."""

import sys

from smilefusion._core import (
    DMARKER_SIZE,
    DegenerateGeometry,
    EmptyClass,
    Error,
    InvalidArgument,
    NoPhaseStructure,
    ShapeMismatch,
    TooFewSubjects,
    UnknownKind,
    auxiliary_head_parameter_count,
    crossval,
    dmarker_feature_names,
    extract_dmarker,
    fusion_kinds,
    grad_check,
    output_width,
    parameter_counts,
    phase_features,
    region_signals,
    run_cli,
    segment_phases,
    synth_generate,
    synth_write,
)

__all__ = [
    "DMARKER_SIZE",
    "DegenerateGeometry",
    "EmptyClass",
    "Error",
    "InvalidArgument",
    "NoPhaseStructure",
    "ShapeMismatch",
    "TooFewSubjects",
    "UnknownKind",
    "auxiliary_head_parameter_count",
    "crossval",
    "dmarker_feature_names",
    "extract_dmarker",
    "fusion_kinds",
    "grad_check",
    "main",
    "output_width",
    "parameter_counts",
    "phase_features",
    "region_signals",
    "run_cli",
    "segment_phases",
    "synth_generate",
    "synth_write",
]


def main(argv=None):
    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
