# Copyright 2026 The Autocam Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Adaptive ISO / white-balance parameter pipeline.

Thin Python surface over the C++ core: RAW container and CFA utilities, the
synthetic scene renderer with its label oracles, training/evaluation entry
points, and the INT8 quantization path.
"""

from autocam._autocam import (  # noqa: F401
    DEFAULT_BINS,
    DEFAULT_TARGET_LUMA,
    AutocamIoError,
    CaptureParams,
    RawImage,
    RawParseError,
    SceneSpec,
    StateError,
    decompose_cfa,
    delta_e76,
    evaluate,
    expected_iso,
    generate_dataset,
    iso_bin_weights,
    kelvin_to_channel_ratios,
    mean_luma,
    oracle_iso,
    oracle_wb,
    param_count,
    predict,
    quantize_checkpoint,
    read_raw,
    recompose_cfa,
    render_raw,
    srgb_to_lab,
    train,
    write_raw,
)

__version__ = "0.1.0"
