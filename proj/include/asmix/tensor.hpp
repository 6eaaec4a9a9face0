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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace asmix {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Global switch for NaN/Inf checks at op boundaries. On by default; turn it
/// off for benchmarking.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

/// Row-major float32 array with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Parameters are
/// held by the model and referenced by every tape that uses them, so
/// gradients from all uses land in one buffer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  /// In-place access for initializers and optimizers. Never used by ops.
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const float> grad() const;
  /// Allocates a zeroed gradient buffer if absent.
  std::span<float> grad_buffer();
  void zero_grad();
  void clear_grad();

  /// Deep copy of data (gradient and requires_grad are not carried over).
  Tensor clone() const;

  bool is(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Define-by-run recorder. Every op on a Tape computes its output eagerly and,
/// when any input requires a gradient, appends an entry holding the backward
/// rule. Entries are appended in execution order, so reverse iteration is a
/// valid reverse topological order.
class Tape {
 public:
  /// Called during backward with the output tensor (its grad is populated).
  using BackwardFn = std::function<void(const Tensor& out)>;

  Tape() = default;
  /// A tape with recording disabled computes outputs only; nothing it
  /// produces requires a gradient. Used for evaluation.
  static Tape inference() {
    Tape t;
    t.recording_ = false;
    return t;
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// out[i,j] = sum_k x[i,k] W[k,j] + b[j]
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
  /// Row-wise normalization with population variance.
  Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    float eps = 1e-5f);
  Tensor transpose2d(const Tensor& x);
  /// Column means of an n x d matrix, shape [d].
  Tensor mean_rows(const Tensor& x);
  /// Mean over rows of -log softmax(logits)[label].
  Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor sum(const Tensor& x);
  Tensor reshape(const Tensor& x, Shape shape);
  /// Stacks equally shaped tensors of shape [d] or [1 x d] into [n x d].
  Tensor stack_rows(std::span<const Tensor> rows);

  /// Registers an externally computed op. Checks the output for non-finite
  /// values (when enabled), propagates requires_grad and records `fn` only
  /// if some input requires a gradient.
  Tensor record(const char* op, Tensor out, std::vector<Tensor> inputs,
                BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool recording_ = true;
};

/// Adds `delta` into t's gradient buffer if t requires a gradient.
void accumulate_grad(const Tensor& t, std::span<const float> delta);
void accumulate_grad(const Tensor& t, std::span<const double> delta);

/// Throws NumericError naming `op` when any value is NaN/Inf and checks are on.
void check_finite(std::span<const float> values, const char* op);

}  // namespace asmix
