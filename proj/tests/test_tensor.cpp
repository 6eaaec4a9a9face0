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

#include <cmath>
#include <limits>
#include <vector>

#include "asmix/error.hpp"
#include "asmix/rng.hpp"
#include "asmix/tensor.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"

using asmix::Tape;
using asmix::Tensor;

namespace {

std::vector<float> vals(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_tensor(asmix::Shape shape, asmix::Rng& rng, bool grad = false) {
  std::vector<float> v(asmix::shape_numel(shape));
  for (auto& e : v) e = static_cast<float>(rng.uniform(-2.0, 2.0));
  return Tensor(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST_CASE("tensor construction checks length") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), asmix::DimensionError);
  Tensor t = Tensor::full({2, 2}, 3.0f);
  CHECK(t.numel() == 4);
  CHECK(t.at(1, 1) == 3.0f);
  CHECK_FALSE(t.has_grad());
  CHECK(t.grad_buffer().size() == 4);
}

TEST_CASE("linear") {
  Tape tape;
  SUBCASE("identity weights") {
    Tensor y = tape.linear(Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {1, 0, 0, 1}),
                           Tensor({2}, {0, 0}));
    CHECK(vals(y) == std::vector<float>{1, 2});
  }
  SUBCASE("zero weights pass the bias") {
    Tensor y = tape.linear(Tensor({1, 2}, {1, 2}), Tensor::zeros({2, 2}),
                           Tensor({2}, {3, 4}));
    CHECK(vals(y) == std::vector<float>{3, 4});
  }
  SUBCASE("hand multiply") {
    Tensor y = tape.linear(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 2}, {1, 1, 1, -1}),
                           Tensor({2}, {0, 1}));
    CHECK(vals(y) == std::vector<float>{3, 0, 7, 0});
  }
  SUBCASE("random vs matmul oracle") {
    asmix::Rng rng(3);
    Tensor x = random_tensor({5, 7}, rng), w = random_tensor({7, 3}, rng),
           b = random_tensor({3}, rng);
    auto ref = oracle::linear(oracle::from(x), oracle::from(w), oracle::vec(b));
    Tensor y = tape.linear(x, w, b);
    for (std::size_t i = 0; i < ref.v.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref.v[i]).epsilon(1e-6));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(tape.linear(Tensor::zeros({1, 3}), Tensor::zeros({2, 2}), Tensor::zeros({2})),
                    asmix::DimensionError);
    CHECK_THROWS_AS(tape.linear(Tensor::zeros({1, 2}), Tensor::zeros({2, 2}), Tensor::zeros({3})),
                    asmix::DimensionError);
  }
  SUBCASE("non-finite output is a numeric error") {
    const float big = std::numeric_limits<float>::max();
    CHECK_THROWS_AS(tape.linear(Tensor({1, 2}, {big, big}), Tensor({2, 1}, {big, big}),
                                Tensor::zeros({1})),
                    asmix::NumericError);
  }
}

TEST_CASE("finite checks can be switched off") {
  asmix::set_finite_checks(false);
  Tape tape;
  const float big = std::numeric_limits<float>::max();
  Tensor y = tape.add(Tensor({1}, {big}), Tensor({1}, {big}));
  CHECK(std::isinf(y.data()[0]));
  asmix::set_finite_checks(true);
  CHECK_THROWS_AS(tape.add(Tensor({1}, {big}), Tensor({1}, {big})), asmix::NumericError);
}

TEST_CASE("layer_norm") {
  Tape tape;
  SUBCASE("constant row returns beta") {
    Tensor y = tape.layer_norm(Tensor({1, 3}, {5, 5, 5}), Tensor::full({3}, 1),
                               Tensor::full({3}, 2));
    CHECK(vals(y) == std::vector<float>{2, 2, 2});
  }
  SUBCASE("already standardized with eps 0") {
    Tensor y = tape.layer_norm(Tensor({1, 2}, {1, -1}), Tensor::full({2}, 1),
                               Tensor::zeros({2}), 0.0f);
    CHECK(vals(y) == std::vector<float>{1, -1});
  }
  SUBCASE("[0,1,2]") {
    Tensor y = tape.layer_norm(Tensor({1, 3}, {0, 1, 2}), Tensor::full({3}, 1),
                               Tensor::zeros({3}));
    const double s = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
    CHECK(y.data()[0] == doctest::Approx(-s).epsilon(1e-6));
    CHECK(y.data()[1] == doctest::Approx(0.0));
    CHECK(y.data()[2] == doctest::Approx(s).epsilon(1e-6));
    CHECK(s == doctest::Approx(1.2247).epsilon(1e-4));
  }
  SUBCASE("row statistics") {
    asmix::Rng rng(11);
    Tensor x = random_tensor({6, 32}, rng);
    Tensor y = tape.layer_norm(x, Tensor::full({32}, 1), Tensor::zeros({32}));
    for (std::size_t i = 0; i < 6; ++i) {
      double mu = 0, var = 0;
      for (std::size_t j = 0; j < 32; ++j) mu += y.at(i, j);
      mu /= 32;
      for (std::size_t j = 0; j < 32; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
      var /= 32;
      CHECK(std::abs(mu) < 1e-5);
      CHECK(std::abs(var - 1.0) < 1e-3);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(tape.layer_norm(Tensor::zeros({2, 0}), Tensor::zeros({0}), Tensor::zeros({0})),
                    asmix::DimensionError);
    CHECK_THROWS_AS(tape.layer_norm(Tensor::zeros({2, 3}), Tensor::zeros({2}), Tensor::zeros({3})),
                    asmix::DimensionError);
  }
}

TEST_CASE("transpose2d") {
  Tape tape;
  CHECK(vals(tape.transpose2d(Tensor({2, 2}, {1, 2, 3, 4}))) == std::vector<float>{1, 3, 2, 4});
  Tensor col = tape.transpose2d(Tensor({1, 3}, {1, 2, 3}));
  CHECK(col.shape() == asmix::Shape{3, 1});
  asmix::Rng rng(5);
  Tensor x = random_tensor({5, 7}, rng);
  CHECK(vals(tape.transpose2d(tape.transpose2d(x))) == vals(x));
  CHECK_THROWS_AS(tape.transpose2d(Tensor::zeros({4})), asmix::DimensionError);
}

TEST_CASE("mean_rows") {
  Tape tape;
  CHECK(vals(tape.mean_rows(Tensor({2, 2}, {1, 2, 3, 4}))) == std::vector<float>{2, 3});
  CHECK(vals(tape.mean_rows(Tensor({1, 3}, {4, 5, 6}))) == std::vector<float>{4, 5, 6});
  asmix::Rng rng(8);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor y = tape.mean_rows(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += x.at(i, j);
    CHECK(std::abs(y.data()[j] - s / 4) < 1e-6);
  }
  CHECK_THROWS_AS(tape.mean_rows(Tensor::zeros({0, 3})), asmix::DimensionError);
}

TEST_CASE("cross_entropy") {
  Tape tape;
  const int zero[] = {0};
  const int two[] = {2};
  CHECK(tape.cross_entropy(Tensor({1, 4}, {0.5f, 0.5f, 0.5f, 0.5f}), zero).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-6));
  CHECK(tape.cross_entropy(Tensor({1, 2}, {1000, 0}), zero).item() == doctest::Approx(0.0));
  const double e = std::exp(1.0);
  const double expect = -std::log(std::pow(e, 3) / (e + e * e + std::pow(e, 3)));
  CHECK(expect == doctest::Approx(0.40761).epsilon(1e-5));
  CHECK(tape.cross_entropy(Tensor({1, 3}, {1, 2, 3}), two).item() ==
        doctest::Approx(expect).epsilon(1e-6));
  const int bad[] = {3};
  CHECK_THROWS_AS(tape.cross_entropy(Tensor({1, 3}, {1, 2, 3}), bad), asmix::InputError);
  const int neg[] = {-1};
  CHECK_THROWS_AS(tape.cross_entropy(Tensor({1, 3}, {1, 2, 3}), neg), asmix::InputError);
}

TEST_CASE("backward") {
  SUBCASE("sum of squares") {
    Tape tape;
    Tensor x({3}, {1, 2, 3}, true);
    tape.backward(tape.sum(tape.mul(x, x)));
    CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{2, 4, 6});
  }
  SUBCASE("sum of linear gives unit bias gradient") {
    Tape tape;
    asmix::Rng rng(1);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng, true);
    Tensor b({2}, {0, 0}, true);
    tape.backward(tape.sum(tape.linear(x, w, b)));
    CHECK(std::vector<float>(b.grad().begin(), b.grad().end()) == std::vector<float>{4, 4});
  }
  SUBCASE("non-scalar loss") {
    Tape tape;
    Tensor x({3}, {1, 2, 3}, true);
    CHECK_THROWS_AS(tape.backward(tape.mul(x, x)), asmix::ContractError);
  }
  SUBCASE("loss not on the tape") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0f)), asmix::ContractError);
  }
  SUBCASE("inference tape records nothing") {
    Tape tape = Tape::inference();
    Tensor x({3}, {1, 2, 3}, true);
    Tensor y = tape.sum(tape.mul(x, x));
    CHECK(tape.size() == 0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.item() == 14.0f);
  }
  SUBCASE("ops on constants are not recorded") {
    Tape tape;
    tape.add(Tensor({2}, {1, 2}), Tensor({2}, {3, 4}));
    CHECK(tape.size() == 0);
  }
}

TEST_CASE("gradients accumulate across uses") {
  asmix::Rng rng(21);
  Tensor w = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor x0 = random_tensor({2, 3}, rng);

  auto single = [&](int uses) {
    Tensor x = x0.clone();
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss = tape.sum(tape.linear(x, w, b));
    if (uses == 2) loss = tape.add(loss, tape.sum(tape.mul(x, x)));
    if (uses == 3) loss = tape.sum(tape.mul(x, x));
    tape.backward(loss);
    return std::vector<float>(x.grad().begin(), x.grad().end());
  };
  const auto a = single(1), c = single(3), both = single(2);
  for (std::size_t i = 0; i < both.size(); ++i) {
    CHECK(both[i] == doctest::Approx(a[i] + c[i]).epsilon(1e-6));
  }
}

TEST_CASE("finite-difference gradients of every primitive") {
  std::uint64_t seed = 100;
  for (const auto& c : gradcheck::primitive_cases()) {
    const auto rep = gradcheck::run(c, 100, seed++);
    INFO(c.name << " max relative error " << rep.max_rel);
    CHECK(rep.max_rel < 1e-3);
  }
}

TEST_CASE("composed graph gradient matches finite differences") {
  // loss = CE(linear(gelu(layer_norm(x)), W, b)) with x reused in a residual.
  asmix::Rng rng(77);
  const int labels[] = {1, 0, 2};
  for (int probe = 0; probe < 30; ++probe) {
    Tensor x = random_tensor({3, 4}, rng, true);
    Tensor g = random_tensor({4}, rng, true), be = random_tensor({4}, rng, true);
    Tensor w = random_tensor({4, 3}, rng, true), b = random_tensor({3}, rng, true);
    Tape tape;
    Tensor h = tape.add(x, asmix::gelu(tape, tape.layer_norm(x, g, be)));
    tape.backward(tape.cross_entropy(tape.linear(h, w, b), labels));

    auto ref = [&](const std::vector<double>& xv) {
      auto ln = oracle::layer_norm(oracle::as_mat(xv, 3, 4), oracle::vec(g), oracle::vec(be));
      for (std::size_t i = 0; i < 12; ++i) ln.v[i] = xv[i] + oracle::gelu(ln.v[i]);
      return oracle::cross_entropy(oracle::linear(ln, oracle::from(w), oracle::vec(b)), labels);
    };
    for (std::size_t e = 0; e < 12; ++e) {
      const double num = oracle::central_diff(ref, oracle::vec(x), e);
      CHECK(oracle::rel_err(x.grad()[e], num) < 1e-3);
    }
  }
}

TEST_CASE("ops are deterministic") {
  asmix::Rng r1(9), r2(9);
  Tensor a = random_tensor({8, 8}, r1), b = random_tensor({8, 8}, r2);
  Tape t1, t2;
  auto y1 = t1.layer_norm(t1.linear(a, a, Tensor::zeros({8})), Tensor::full({8}, 1), Tensor::zeros({8}));
  auto y2 = t2.layer_norm(t2.linear(b, b, Tensor::zeros({8})), Tensor::full({8}, 1), Tensor::zeros({8}));
  CHECK(vals(y1) == vals(y2));
}
