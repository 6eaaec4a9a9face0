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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asmix/error.hpp"
#include "asmix/mixer.hpp"

namespace asmix {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// In-memory image of an ASMC file.
///
/// On disk (little-endian):
///   "ASMC" | u32 version | u32 header_len | header (UTF-8 JSON) | payload
/// The header is {"config": {...}, "tensors": [{"name", "shape", "offset"}],
/// "metadata": [[key, value], ...]}; offsets are byte offsets into the
/// payload, which is the concatenation of float32 tensor data in index order.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  MixerConfig config;
  std::vector<NamedTensor> tensors;
  Metadata metadata;

  /// Deep-copies the model's parameters.
  static Checkpoint from_model(const MixerModel& model, Metadata metadata = {});
  /// Fresh model over copies of the stored tensors.
  MixerModel to_model() const;

  std::optional<std::string> meta(const std::string& key) const;
  void set_meta(const std::string& key, std::string value);
};

enum class CheckpointErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kHeader,
  kInconsistent,
};

class CheckpointError : public ParseError {
 public:
  CheckpointError(CheckpointErrorKind kind, std::string field,
                  const std::string& what)
      : ParseError("checkpoint " + field + ": " + what),
        kind_(kind),
        field_(std::move(field)) {}
  CheckpointErrorKind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  CheckpointErrorKind kind_;
  std::string field_;
};

/// Container-level view: magic, version, header and tensor payloads are
/// validated, the config block is left as raw JSON text. Used for foreign
/// checkpoints whose config is not a MixerConfig.
struct TensorContainer {
  std::uint32_t version = 0;
  std::string config_json;
  std::vector<NamedTensor> tensors;
  Metadata metadata;

  const Tensor* find(const std::string& name) const;
};

TensorContainer decode_container(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes an ASMC container with an arbitrary JSON config object. Used to
/// produce three-channel source checkpoints.
std::vector<std::uint8_t> encode_container(const std::string& config_json,
                                           const std::vector<NamedTensor>& tensors,
                                           const Metadata& metadata);

// --- Channel conversion ----------------------------------------------------

enum class GrayMode { kLuma, kSum };

/// ITU-R BT.601 luma weights for (R, G, B).
inline constexpr std::array<double, 3> kLumaCoefficients{0.299, 0.587, 0.114};

std::optional<GrayMode> parse_gray_mode(std::string_view s);
std::string gray_mode_name(GrayMode mode);
std::array<double, 3> gray_coefficients(GrayMode mode);

/// Patch projection of a three-channel model. `weight` is either
/// [C x ph x pw x dim] or [(C*ph*pw) x dim], channel-major.
struct RgbProjectionWeights {
  Tensor weight;
  Tensor bias;
  std::array<std::size_t, 2> patch{16, 16};
};

struct GrayProjection {
  Tensor weight;  // [(ph*pw) x dim]
  Tensor bias;    // [dim], copied unchanged
};

/// luma: W = 0.299 W_R + 0.587 W_G + 0.114 W_B; sum: W = W_R + W_G + W_B.
/// Combined in double, rounded once. Throws InputError unless C == 3.
GrayProjection rgb_to_gray(const RgbProjectionWeights& src, GrayMode mode);

/// Extracts patch_embed.{weight,bias} of a three-channel container.
RgbProjectionWeights rgb_projection_from(const TensorContainer& c);

struct ImportedModel {
  MixerModel model;
  Metadata metadata;  // conversion mode, coefficients, source digest
};

/// Builds `target` with fresh parameters from `rng`, then replaces the patch
/// projection with the converted source projection.
ImportedModel import_foreign(std::span<const std::uint8_t> source_bytes,
                             const MixerConfig& target, GrayMode mode, Rng& rng);

/// Hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace asmix
