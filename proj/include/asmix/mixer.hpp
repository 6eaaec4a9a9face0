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
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asmix/activations.hpp"
#include "asmix/audio.hpp"
#include "asmix/rng.hpp"
#include "asmix/tensor.hpp"

namespace asmix {

/// Architecture hyperparameters. Defaults follow the 768-wide, 12-layer
/// setting with 16x16 non-overlapping patches over a 128x128 log-mel grid.
struct MixerConfig {
  std::array<std::size_t, 2> patch{16, 16};   // (time, mel)
  std::array<std::size_t, 2> stride{16, 16};  // <= patch in each axis
  std::size_t dim = 768;
  std::size_t depth = 12;
  std::size_t token_hidden = 384;
  std::size_t channel_hidden = 3072;
  ActivationKind activation{};
  std::size_t num_classes = 35;
  std::array<std::size_t, 2> input_shape{128, kMelBins};  // (frames, bins)

  std::size_t grid_rows() const;
  std::size_t grid_cols() const;
  /// Token count S.
  std::size_t num_tokens() const;
  std::size_t patch_area() const { return patch[0] * patch[1]; }

  /// Throws ConfigError naming the first violated field.
  void validate() const;

  bool operator==(const MixerConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Every trainable array, in the canonical order used for initialization,
/// checkpoints and optimizer state.
std::vector<ParamSpec> parameter_specs(const MixerConfig& cfg);

struct ParamGroup {
  std::string component;
  std::size_t count = 0;
};

/// Per-component totals: patch embedding, per-block token/channel mixing
/// summed over depth, final norm, head. Rows sum to param_count(cfg).
std::vector<ParamGroup> param_breakdown(const MixerConfig& cfg);

/// Closed-form trainable-parameter total.
std::size_t param_count(const MixerConfig& cfg);

/// Flattens every (ph x pw) window of a (T x F) grid. Tokens are enumerated
/// time-major then frequency; each patch is row-major (time rows, mel cols).
Tensor patchify(const Tensor& grid, const MixerConfig& cfg);
Tensor patchify(const MelSpectrogram& spec, const MixerConfig& cfg);

struct MlpParams {
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  std::optional<AconParams> act;
};

struct BlockParams {
  Tensor norm1_gamma, norm1_beta;
  MlpParams token;
  Tensor norm2_gamma, norm2_beta;
  MlpParams channel;
};

/// Two-layer MLP along the last axis: fc2(act(fc1(x))).
Tensor mlp(Tape& tape, const Tensor& x, const MlpParams& p,
           const ActivationKind& activation);

/// Pre-norm token mixing then channel mixing, each with a residual:
///   U = X + T(mlp_token(T(LN1(X))))
///   Y = U + mlp_channel(LN2(U))
Tensor mixer_block(Tape& tape, const Tensor& x, const BlockParams& block,
                   const ActivationKind& activation);

using NamedTensor = std::pair<std::string, Tensor>;

class MixerModel {
 public:
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, norm gains 1,
  /// norm shifts 0, Acon-C parameters from aconc_init.
  static MixerModel build(const MixerConfig& cfg, Rng& rng);
  /// Adopts existing tensors (shared, not copied). Throws InputError on a
  /// missing name or wrong shape.
  static MixerModel from_tensors(const MixerConfig& cfg,
                                 const std::vector<NamedTensor>& tensors);

  const MixerConfig& config() const { return cfg_; }

  /// Logits of shape [C] for one (T x F) input grid.
  Tensor forward(Tape& tape, const Tensor& grid) const;
  Tensor forward(Tape& tape, const MelSpectrogram& spec) const;
  /// Same as forward, starting from already patchified input [S x ph*pw].
  Tensor forward_patches(Tape& tape, const Tensor& patches) const;

  /// Handles to every parameter, in parameter_specs order.
  std::vector<NamedTensor> parameters() const;
  void zero_grad() const;

  Tensor patch_weight, patch_bias;
  std::vector<BlockParams> blocks;
  Tensor norm_gamma, norm_beta;
  Tensor head_weight, head_bias;

 private:
  MixerConfig cfg_;
};

inline MixerModel build_model(const MixerConfig& cfg, Rng& rng) {
  return MixerModel::build(cfg, rng);
}

}  // namespace asmix
