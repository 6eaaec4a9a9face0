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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asmix/tensor.hpp"

namespace asmix {

/// Mel bins per frame. Fixed; the model's frequency axis depends on it.
inline constexpr std::size_t kMelBins = 128;

struct AudioClip {
  std::vector<float> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 16000;
};

/// Framing and filterbank settings for log_mel.
struct FrontendConfig {
  int sample_rate = 16000;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  // Zero-padded DFT length. With 128 HTK filters at 16 kHz the lowest filter
  // centers are ~14 Hz apart; 512-point bins (31 Hz) leave filters empty or
  // sharing a peak bin, 1024-point bins (15.6 Hz) do not.
  std::size_t n_fft = 1024;
  double log_floor = 1e-10;
  std::size_t target_frames = 128;

  std::size_t frame_length() const;
  std::size_t hop_length() const;
};

/// frames x 128 log-mel energies, row-major.
struct MelSpectrogram {
  std::size_t frames = 0;
  std::vector<float> cells;
  double frame_hop = 0.01;
  bool normalized = false;

  float at(std::size_t t, std::size_t m) const {
    return cells[t * kMelBins + m];
  }
  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(cells).subspan(t * kMelBins, kMelBins);
  }
  Tensor to_tensor() const;
};

// --- WAV -------------------------------------------------------------------

/// Parses a RIFF/WAVE PCM 16-bit mono or stereo file. Stereo is averaged.
AudioClip load_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav_file(const std::filesystem::path& path);
/// Mono PCM 16-bit; samples are clamped to [-1, 1) and rounded.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void write_wav_file(const std::filesystem::path& path, const AudioClip& clip);

AudioClip resample_linear(const AudioClip& clip, int target_rate);

// --- Spectral front end ----------------------------------------------------

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Dense kMelBins x (n_fft/2 + 1) triangular filterbank, HTK mel scale,
/// spanning [0, sample_rate / 2]. Each row also records its support.
struct MelFilterbank {
  std::size_t n_bins = 0;  // n_fft / 2 + 1
  std::vector<float> weights;
  std::vector<std::size_t> first;  // first non-zero bin per filter
  std::vector<std::size_t> last;   // one past the last non-zero bin
  std::vector<double> center_hz;

  float weight(std::size_t filter, std::size_t bin) const {
    return weights[filter * n_bins + bin];
  }
};

MelFilterbank mel_filterbank(const FrontendConfig& cfg);

/// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

/// |X[k]|^2 for k in [0, n_fft/2] of `frame` zero-padded to n_fft. Uses a
/// radix-2 FFT when n_fft is a power of two, the direct sum otherwise.
std::vector<double> power_spectrum(std::span<const double> frame,
                                   std::size_t n_fft);
/// Direct O(n^2) evaluation; reference for power_spectrum.
std::vector<double> power_spectrum_naive(std::span<const double> frame,
                                         std::size_t n_fft);

/// floor((n - frame_len) / hop) + 1, or 0 when n < frame_len.
std::size_t frame_count(std::size_t n_samples, std::size_t frame_len,
                        std::size_t hop);

/// Natural-log mel energies, ln(max(energy, log_floor)).
MelSpectrogram log_mel(const AudioClip& clip, const FrontendConfig& cfg);

/// Keeps the first `target_frames` rows or appends ln(log_floor) rows.
MelSpectrogram pad_or_truncate(const MelSpectrogram& spec,
                               std::size_t target_frames,
                               double log_floor = 1e-10);

/// (cell - mean) / (2 * std).
MelSpectrogram normalize(const MelSpectrogram& spec, double mean, double std);

// --- Datasets --------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  int label = 0;
};

/// CSV with header `path,label`; relative paths resolve against the
/// manifest's own directory.
struct Manifest {
  std::filesystem::path source;
  std::vector<ManifestEntry> entries;

  int num_classes() const;
};

Manifest read_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestEntry> entries);

struct FeatureStats {
  double mean = 0.0;
  double std = 0.0;
  std::uint64_t count = 0;
  bool degenerate = false;  // std == 0; normalization is undefined
};

/// One-pass statistics over every cell. Sums are kept relative to the first
/// cell so a constant input yields std == 0 exactly.
FeatureStats dataset_stats(std::span<const MelSpectrogram> specs);
/// Streams the manifest clip by clip through `load_features`.
FeatureStats dataset_stats(const Manifest& manifest, const FrontendConfig& cfg);

/// read -> resample to cfg.sample_rate -> log_mel -> pad_or_truncate.
MelSpectrogram load_features(const std::filesystem::path& wav,
                             const FrontendConfig& cfg);

/// Features for every manifest row in order. `jobs` > 1 fans out across
/// threads. With a cache directory, log-mel grids are read from / written to
/// ASMF files under a subdirectory keyed by the front-end settings.
std::vector<MelSpectrogram> extract_features(
    const Manifest& manifest, const FrontendConfig& cfg, unsigned jobs = 1,
    const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// ASMF: "ASMF", u32 T, u32 128, T*128 little-endian float32.
void write_feature_cache(const std::filesystem::path& path,
                         const MelSpectrogram& spec);
MelSpectrogram read_feature_cache(const std::filesystem::path& path);
std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir,
                                         const Manifest& manifest,
                                         const ManifestEntry& entry,
                                         const FrontendConfig& cfg);

}  // namespace asmix
