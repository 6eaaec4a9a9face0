// Copyright 2026 The ASMix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "asmix/audio.hpp"
#include "asmix/config_json.hpp"
#include "asmix/mixer.hpp"
#include "asmix/train.hpp"

namespace asmix {

/// Everything a training run needs. Serialized in resolved form (defaults
/// applied, paths absolute) as run.json, which is itself a valid config.
///
/// {
///   "frontend": {sample_rate, frame_ms, hop_ms, n_fft, log_floor, target_frames},
///   "model":    {patch_size, stride, dim, depth, token_hidden, channel_hidden,
///                activation, num_classes, input_shape},
///   "train":    {lr0, decay, decay_start_epoch, epochs, batch_size, seed, seeds,
///                beta1, beta2, eps, record_timing},
///   "data":     {train, val, test},
///   "output_dir": "...", "cache_dir": "...", "jobs": 1
/// }
struct RunConfig {
  FrontendConfig frontend;
  MixerConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds;  // non-empty selects a multi-seed run
  std::optional<std::filesystem::path> train_manifest;
  std::optional<std::filesystem::path> val_manifest;
  std::optional<std::filesystem::path> test_manifest;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> cache_dir;
  unsigned jobs = 1;
};

/// Parses and validates field types. Relative paths resolve against
/// `base_dir`. When "model.input_shape" is absent it is derived from the
/// front end as (target_frames, 128).
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& cfg);

/// Checks everything a training run touches before any side effect: data
/// paths exist, manifests parse, labels fit num_classes, the model input
/// matches the front end and the output directory can be created.
void validate_for_training(const RunConfig& cfg);

}  // namespace asmix
