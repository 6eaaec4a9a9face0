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

#include "asmix/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "asmix/error.hpp"

namespace asmix {
namespace {

std::atomic<bool> g_finite_checks{true};

void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

void check_finite(std::span<const float> values, const char* op) {
  if (!g_finite_checks) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(op) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  std::vector<float> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape()));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const float> Tensor::data() const { return impl_->data; }
std::span<float> Tensor::mutable_data() { return impl_->data; }

float Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor");
  return impl_->data[0];
}

float Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape.at(1) + j];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::grad_buffer() {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0f);
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

void Tensor::clear_grad() {
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data, false); }

void accumulate_grad(const Tensor& t, std::span<const float> delta) {
  if (!t.requires_grad()) return;
  Tensor handle = t;
  auto g = handle.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

void accumulate_grad(const Tensor& t, std::span<const double> delta) {
  if (!t.requires_grad()) return;
  Tensor handle = t;
  auto g = handle.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] += static_cast<float>(delta[i]);
  }
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::record(const char* op, Tensor out, std::vector<Tensor> inputs,
                    BackwardFn fn) {
  check_finite(out.data(), op);
  if (!recording_) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    out.set_requires_grad(true);
    entries_.push_back({std::move(inputs), out, std::move(fn)});
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that was not recorded on a tape");
  }
  Tensor seed = loss;
  seed.grad_buffer()[0] = 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->fn(it->output);
  }
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1,
          "linear: expected x[n x d_in], W[d_in x d_out], b[d_out]");
  const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(1);
  require(w.dim(0) == din && b.dim(0) == dout,
          "linear: shapes " + shape_str(x.shape()) + ", " +
              shape_str(w.shape()) + ", " + shape_str(b.shape()) +
              " do not conform");

  auto xd = x.data();
  auto wd = w.data();
  auto bd = b.data();
  std::vector<float> out(n * dout);
  std::vector<double> acc(dout);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dout; ++j) acc[j] = bd[j];
    for (std::size_t k = 0; k < din; ++k) {
      const double xv = xd[i * din + k];
      if (xv == 0.0) continue;
      const float* wrow = wd.data() + k * dout;
      for (std::size_t j = 0; j < dout; ++j) acc[j] += xv * wrow[j];
    }
    for (std::size_t j = 0; j < dout; ++j) {
      out[i * dout + j] = static_cast<float>(acc[j]);
    }
  }

  return record(
      "linear", Tensor({n, dout}, std::move(out)), {x, w, b},
      [x, w, b, n, din, dout](const Tensor& y) mutable {
        auto gy = y.grad();
        if (x.requires_grad()) {
          auto wd = w.data();
          std::vector<double> gx(n * din);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < din; ++k) {
              double s = 0.0;
              const float* wrow = wd.data() + k * dout;
              const float* grow = gy.data() + i * dout;
              for (std::size_t j = 0; j < dout; ++j) s += grow[j] * wrow[j];
              gx[i * din + k] = s;
            }
          }
          accumulate_grad(x, std::span<const double>(gx));
        }
        if (w.requires_grad()) {
          auto xd = x.data();
          std::vector<double> gw(din * dout, 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            const float* grow = gy.data() + i * dout;
            for (std::size_t k = 0; k < din; ++k) {
              const double xv = xd[i * din + k];
              if (xv == 0.0) continue;
              double* gwrow = gw.data() + k * dout;
              for (std::size_t j = 0; j < dout; ++j) gwrow[j] += xv * grow[j];
            }
          }
          accumulate_grad(w, std::span<const double>(gw));
        }
        if (b.requires_grad()) {
          std::vector<double> gb(dout, 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dout; ++j) gb[j] += gy[i * dout + j];
          }
          accumulate_grad(b, std::span<const double>(gb));
        }
      });
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gamma,
                        const Tensor& beta, float eps) {
  require(x.rank() == 2, "layer_norm: expected a matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  require(d >= 1, "layer_norm: feature dimension is 0");
  require(gamma.rank() == 1 && gamma.dim(0) == d && beta.rank() == 1 &&
              beta.dim(0) == d,
          "layer_norm: gamma/beta must have shape [" + std::to_string(d) + "]");
  if (!(eps >= 0.0f)) throw InputError("layer_norm: eps must be >= 0");

  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<float> out(n * d);
  std::vector<double> xhat(n * d);
  std::vector<double> rstd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = xd.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * rstd[i];
      xhat[i * d + j] = h;
      out[i * d + j] = static_cast<float>(gd[j] * h + bd[j]);
    }
  }

  return record(
      "layer_norm", Tensor({n, d}, std::move(out)), {x, gamma, beta},
      [x, gamma, beta, n, d, xhat = std::move(xhat),
       rstd = std::move(rstd)](const Tensor& y) mutable {
        auto gy = y.grad();
        auto gd = gamma.data();
        if (gamma.requires_grad() || beta.requires_grad()) {
          std::vector<double> gg(d, 0.0), gb(d, 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              gg[j] += gy[i * d + j] * xhat[i * d + j];
              gb[j] += gy[i * d + j];
            }
          }
          accumulate_grad(gamma, std::span<const double>(gg));
          accumulate_grad(beta, std::span<const double>(gb));
        }
        if (x.requires_grad()) {
          std::vector<double> gx(n * d);
          for (std::size_t i = 0; i < n; ++i) {
            double mean_g = 0.0, mean_gh = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double g = gy[i * d + j] * gd[j];
              mean_g += g;
              mean_gh += g * xhat[i * d + j];
            }
            mean_g /= static_cast<double>(d);
            mean_gh /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const double g = gy[i * d + j] * gd[j];
              gx[i * d + j] =
                  rstd[i] * (g - mean_g - xhat[i * d + j] * mean_gh);
            }
          }
          accumulate_grad(x, std::span<const double>(gx));
        }
      });
}

Tensor Tape::transpose2d(const Tensor& x) {
  require(x.rank() == 2, "transpose2d: expected rank 2, got shape " +
                             shape_str(x.shape()));
  const std::size_t n = x.dim(0), m = x.dim(1);
  auto xd = x.data();
  std::vector<float> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = xd[i * m + j];
  }
  return record("transpose2d", Tensor({m, n}, std::move(out)), {x},
                [x, n, m](const Tensor& y) mutable {
                  auto gy = y.grad();
                  std::vector<float> gx(n * m);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < m; ++j) {
                      gx[i * m + j] = gy[j * n + i];
                    }
                  }
                  accumulate_grad(x, std::span<const float>(gx));
                });
}

Tensor Tape::mean_rows(const Tensor& x) {
  require(x.rank() == 2, "mean_rows: expected a matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  require(n >= 1, "mean_rows: no rows");
  auto xd = x.data();
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) acc[j] += xd[i * d + j];
  }
  std::vector<float> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = static_cast<float>(acc[j] / static_cast<double>(n));
  }
  return record("mean_rows", Tensor({d}, std::move(out)), {x},
                [x, n, d](const Tensor& y) mutable {
                  auto gy = y.grad();
                  std::vector<double> gx(n * d);
                  const double inv = 1.0 / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) {
                      gx[i * d + j] = gy[j] * inv;
                    }
                  }
                  accumulate_grad(x, std::span<const double>(gx));
                });
}

Tensor Tape::cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2 || logits.rank() == 1,
          "cross_entropy: logits must be [n x C] or [C]");
  const std::size_t n = logits.rank() == 2 ? logits.dim(0) : 1;
  const std::size_t c = logits.rank() == 2 ? logits.dim(1) : logits.dim(0);
  require(n >= 1 && c >= 1, "cross_entropy: empty logits");
  if (labels.size() != n) {
    throw InputError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw InputError("cross_entropy: label " + std::to_string(label) +
                       " outside [0, " + std::to_string(c) + ")");
    }
  }

  auto ld = logits.data();
  std::vector<double> probs(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = ld.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, double(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += -(row[labels[i]] - mx - std::log(z));
  }
  const float loss = static_cast<float>(total / static_cast<double>(n));

  std::vector<int> owned(labels.begin(), labels.end());
  return record("cross_entropy", Tensor::scalar(loss), {logits},
                [logits, n, c, probs = std::move(probs),
                 owned = std::move(owned)](const Tensor& y) mutable {
                  const double g = y.grad()[0] / static_cast<double>(n);
                  std::vector<double> gl(n * c);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                      const double onehot =
                          static_cast<std::size_t>(owned[i]) == j ? 1.0 : 0.0;
                      gl[i * c + j] = g * (probs[i * c + j] - onehot);
                    }
                  }
                  accumulate_grad(logits, std::span<const double>(gl));
                });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shapes " + shape_str(a.shape()) +
                                      " and " + shape_str(b.shape()) +
                                      " differ");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return record("add", Tensor(a.shape(), std::move(out)), {a, b},
                [a, b](const Tensor& y) mutable {
                  accumulate_grad(a, y.grad());
                  accumulate_grad(b, y.grad());
                });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shapes " + shape_str(a.shape()) +
                                      " and " + shape_str(b.shape()) +
                                      " differ");
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return record("mul", Tensor(a.shape(), std::move(out)), {a, b},
                [a, b](const Tensor& y) mutable {
                  auto gy = y.grad();
                  const std::size_t n = gy.size();
                  if (a.requires_grad()) {
                    std::vector<float> ga(n);
                    for (std::size_t i = 0; i < n; ++i) {
                      ga[i] = gy[i] * b.data()[i];
                    }
                    accumulate_grad(a, std::span<const float>(ga));
                  }
                  if (b.requires_grad()) {
                    std::vector<float> gb(n);
                    for (std::size_t i = 0; i < n; ++i) {
                      gb[i] = gy[i] * a.data()[i];
                    }
                    accumulate_grad(b, std::span<const float>(gb));
                  }
                });
}

Tensor Tape::sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return record("sum", Tensor::scalar(static_cast<float>(acc)), {x},
                [x](const Tensor& y) mutable {
                  std::vector<float> gx(x.numel(), y.grad()[0]);
                  accumulate_grad(x, std::span<const float>(gx));
                });
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " +
              shape_str(shape));
  std::vector<float> data(x.data().begin(), x.data().end());
  return record("reshape", Tensor(std::move(shape), std::move(data)), {x},
                [x](const Tensor& y) mutable { accumulate_grad(x, y.grad()); });
}

Tensor Tape::stack_rows(std::span<const Tensor> rows) {
  require(!rows.empty(), "stack_rows: no rows");
  const std::size_t d = rows[0].numel();
  std::vector<float> out;
  out.reserve(rows.size() * d);
  for (const auto& r : rows) {
    require(r.numel() == d && r.rank() <= 2 && (r.rank() < 2 || r.dim(0) == 1),
            "stack_rows: rows must share shape [d] or [1 x d]");
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  std::vector<Tensor> inputs(rows.begin(), rows.end());
  const std::size_t n = rows.size();
  return record("stack_rows", Tensor({n, d}, std::move(out)), inputs,
                [inputs, d](const Tensor& y) mutable {
                  auto gy = y.grad();
                  for (std::size_t i = 0; i < inputs.size(); ++i) {
                    accumulate_grad(inputs[i], gy.subspan(i * d, d));
                  }
                });
}

}  // namespace asmix
