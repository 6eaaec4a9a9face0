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
#include <iosfwd>
#include <string>
#include <vector>

#include "asmix/audio.hpp"

namespace asmix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct SynthOutput {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
  std::size_t clips = 0;
};

/// Writes `classes * per_class` one-second 16 kHz clips under out/wav and
/// train/val/test manifests split 60/20/20 within each class. Class k is a
/// 0.5-amplitude sine at 300 * (k + 1) Hz with random phase plus uniform
/// noise in [-0.05, 0.05].
SynthOutput synth_dataset(const std::filesystem::path& out, int classes,
                          int per_class, std::uint64_t seed);

/// Sine frequency of synthetic class k.
inline double synth_frequency(int k) { return 300.0 * (k + 1); }

/// Entry point behind the `asm` binary. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace asmix::cli
