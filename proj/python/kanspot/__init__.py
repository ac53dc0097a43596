# Copyright 2026 The kanspot Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Keyword spotting with Gram-polynomial KAN convolutions."""

from ._core import (
    NUM_CLASSES,
    SAMPLE_RATE,
    ContractError,
    DataError,
    DecoderParams,
    DimensionError,
    Error,
    FrontendConfig,
    InfeasibleError,
    IoError,
    LengthError,
    Model,
    RateError,
    VariantConfig,
    class_names,
    compute_features,
    decode,
    evaluate,
    frame_count,
    gram_eval,
    keywords,
    load_model,
    logmel,
    mix_at_snr,
    param_count,
    phi,
    power_ratio_db,
    read_wav,
    resolve_workers,
    score_trace,
    sweep_threshold,
    synth,
    train,
    variants,
    width_for_budget,
    write_wav,
)

__version__ = "0.1.0"
