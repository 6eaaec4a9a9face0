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

#include <optional>
#include <string>
#include <string_view>

#include "asmix/rng.hpp"
#include "asmix/tensor.hpp"

namespace asmix {

enum class ActivationTag { kGelu, kMish, kSwish, kAconC };

/// Which activation a Mixer MLP uses. `adapted` only matters for Acon-C and
/// selects the near-Swish initialization (p1 ~ 1, p2 ~ 0).
struct ActivationKind {
  ActivationTag tag = ActivationTag::kGelu;
  bool adapted = false;

  bool has_params() const { return tag == ActivationTag::kAconC; }
  bool operator==(const ActivationKind&) const = default;
};

/// Accepted strings: gelu, mish, swish, aconc, aconc-adapted.
std::optional<ActivationKind> parse_activation(std::string_view name);
std::string activation_name(const ActivationKind& kind);
inline constexpr std::string_view kActivationChoices =
    "gelu|mish|swish|aconc|aconc-adapted";

// Scalar definitions, evaluated in double.
double gelu(double x);
double gelu_grad(double x);
double mish(double x);
double mish_grad(double x);
double swish(double x);
double swish_grad(double x);
double sigmoid(double x);
double softplus(double x);

/// Per-channel learnable Acon-C parameters, each of shape [d].
struct AconParams {
  Tensor p1;
  Tensor p2;
  Tensor beta;
};

/// adapted: p1 = 1 + s*N(0,1), p2 = s*N(0,1); otherwise p1, p2 ~ N(0,1).
/// beta = 1 in both modes. Draw order: all of p1, then all of p2.
AconParams aconc_init(std::size_t d, bool adapted, Rng& rng,
                      double noise_scale = 0.01);

/// Elementwise activations on the tape.
Tensor gelu(Tape& tape, const Tensor& x);
Tensor mish(Tape& tape, const Tensor& x);
Tensor swish(Tape& tape, const Tensor& x);

/// (p1-p2) * x * sigmoid(beta * (p1-p2) * x) + p2 * x, with the parameter
/// vectors indexed by the last axis of x ([n x d] or [d]).
Tensor aconc(Tape& tape, const Tensor& x, const Tensor& p1, const Tensor& p2,
             const Tensor& beta);

/// Dispatches on `kind`; `params` must be set for Acon-C.
Tensor activate(Tape& tape, const Tensor& x, const ActivationKind& kind,
                const AconParams* params);

}  // namespace asmix
