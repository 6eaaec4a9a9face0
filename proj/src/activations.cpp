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

#include "asmix/activations.hpp"

#include <cmath>
#include <numbers>

#include "asmix/error.hpp"

namespace asmix {

std::optional<ActivationKind> parse_activation(std::string_view name) {
  if (name == "gelu") return ActivationKind{ActivationTag::kGelu, false};
  if (name == "mish") return ActivationKind{ActivationTag::kMish, false};
  if (name == "swish") return ActivationKind{ActivationTag::kSwish, false};
  if (name == "aconc") return ActivationKind{ActivationTag::kAconC, false};
  if (name == "aconc-adapted") {
    return ActivationKind{ActivationTag::kAconC, true};
  }
  return std::nullopt;
}

std::string activation_name(const ActivationKind& kind) {
  switch (kind.tag) {
    case ActivationTag::kGelu:
      return "gelu";
    case ActivationTag::kMish:
      return "mish";
    case ActivationTag::kSwish:
      return "swish";
    case ActivationTag::kAconC:
      return kind.adapted ? "aconc-adapted" : "aconc";
  }
  return "gelu";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 20.0) return x;
  if (x < -20.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Phi(x) through erfc so the left tail keeps its relative precision.
double gelu(double x) {
  return x * 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double gelu_grad(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double mish(double x) { return x * std::tanh(softplus(x)); }

double mish_grad(double x) {
  const double t = std::tanh(softplus(x));
  return t + x * (1.0 - t * t) * sigmoid(x);
}

double swish(double x) { return x * sigmoid(x); }

double swish_grad(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

AconParams aconc_init(std::size_t d, bool adapted, Rng& rng,
                      double noise_scale) {
  if (d == 0) throw InputError("aconc_init: channel count must be >= 1");
  std::vector<float> p1(d), p2(d);
  for (auto& v : p1) {
    v = adapted ? static_cast<float>(1.0 + noise_scale * rng.normal())
                : static_cast<float>(rng.normal());
  }
  for (auto& v : p2) {
    v = adapted ? static_cast<float>(noise_scale * rng.normal())
                : static_cast<float>(rng.normal());
  }
  return {Tensor({d}, std::move(p1), true), Tensor({d}, std::move(p2), true),
          Tensor::full({d}, 1.0f, true)};
}

namespace {

using ScalarFn = double (*)(double);

Tensor elementwise(Tape& tape, const char* op, const Tensor& x, ScalarFn f,
                   ScalarFn df) {
  auto xd = x.data();
  std::vector<float> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(f(xd[i]));
  }
  return tape.record(op, Tensor(x.shape(), std::move(out)), {x},
                     [x, df](const Tensor& y) mutable {
                       auto gy = y.grad();
                       auto xd = x.data();
                       std::vector<double> gx(gy.size());
                       for (std::size_t i = 0; i < gx.size(); ++i) {
                         gx[i] = gy[i] * df(xd[i]);
                       }
                       accumulate_grad(x, std::span<const double>(gx));
                     });
}

}  // namespace

Tensor gelu(Tape& tape, const Tensor& x) {
  return elementwise(tape, "gelu", x, static_cast<ScalarFn>(gelu), gelu_grad);
}

Tensor mish(Tape& tape, const Tensor& x) {
  return elementwise(tape, "mish", x, static_cast<ScalarFn>(mish), mish_grad);
}

Tensor swish(Tape& tape, const Tensor& x) {
  return elementwise(tape, "swish", x, static_cast<ScalarFn>(swish),
                     swish_grad);
}

Tensor aconc(Tape& tape, const Tensor& x, const Tensor& p1, const Tensor& p2,
             const Tensor& beta) {
  if (x.rank() < 1 || x.rank() > 2) {
    throw DimensionError("aconc: expected x of rank 1 or 2, got " +
                         shape_str(x.shape()));
  }
  const std::size_t d = x.shape().back();
  for (const Tensor* p : {&p1, &p2, &beta}) {
    if (p->rank() != 1 || p->dim(0) != d) {
      throw DimensionError("aconc: parameter shape " + shape_str(p->shape()) +
                           " does not match channel dimension " +
                           std::to_string(d));
    }
  }
  auto xd = x.data();
  auto a = p1.data();
  auto b = p2.data();
  auto k = beta.data();
  std::vector<float> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t j = i % d;
    const double diff = double(a[j]) - double(b[j]);
    const double v = xd[i];
    out[i] = static_cast<float>(diff * v * sigmoid(k[j] * diff * v) + b[j] * v);
  }

  return tape.record(
      "aconc", Tensor(x.shape(), std::move(out)), {x, p1, p2, beta},
      [x, p1, p2, beta, d](const Tensor& y) mutable {
        auto gy = y.grad();
        auto xd = x.data();
        auto a = p1.data();
        auto b = p2.data();
        auto k = beta.data();
        std::vector<double> gx(xd.size());
        std::vector<double> g1(d, 0.0), g2(d, 0.0), gk(d, 0.0);
        for (std::size_t i = 0; i < xd.size(); ++i) {
          const std::size_t j = i % d;
          const double diff = double(a[j]) - double(b[j]);
          const double v = xd[i];
          const double s = sigmoid(k[j] * diff * v);
          const double ds = s * (1.0 - s);
          const double g = gy[i];
          gx[i] = g * (diff * s + k[j] * diff * diff * v * ds + b[j]);
          // d/d(diff); p1 enters as +diff, p2 as -diff plus the linear term.
          const double gdiff = g * (v * s + k[j] * diff * v * v * ds);
          g1[j] += gdiff;
          g2[j] += -gdiff + g * v;
          gk[j] += g * diff * diff * v * v * ds;
        }
        accumulate_grad(x, std::span<const double>(gx));
        accumulate_grad(p1, std::span<const double>(g1));
        accumulate_grad(p2, std::span<const double>(g2));
        accumulate_grad(beta, std::span<const double>(gk));
      });
}

Tensor activate(Tape& tape, const Tensor& x, const ActivationKind& kind,
                const AconParams* params) {
  switch (kind.tag) {
    case ActivationTag::kGelu:
      return gelu(tape, x);
    case ActivationTag::kMish:
      return mish(tape, x);
    case ActivationTag::kSwish:
      return swish(tape, x);
    case ActivationTag::kAconC:
      if (params == nullptr) {
        throw ContractError("activate: Acon-C selected without parameters");
      }
      return aconc(tape, x, params->p1, params->p2, params->beta);
  }
  throw ContractError("activate: unknown activation");
}

}  // namespace asmix
