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
#include <vector>

#include "asmix/activations.hpp"
#include "asmix/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using doctest::Approx;

TEST_CASE("scalar reference values") {
  CHECK(asmix::gelu(0.0) == 0.0);
  CHECK(asmix::gelu(1.0) == Approx(0.841345).epsilon(1e-6));
  const double g10 = asmix::gelu(-10.0);
  CHECK(std::isfinite(g10));
  CHECK(g10 < 0.0);
  // -10 * Phi(-10); Phi(-10) alone is 7.62e-24.
  CHECK(std::abs(g10 / -7.6198530241605e-23 - 1.0) < 1e-6);

  CHECK(asmix::mish(0.0) == 0.0);
  CHECK(asmix::mish(1.0) == Approx(0.865098).epsilon(1e-6));
  const double m20 = asmix::mish(-20.0);
  CHECK(m20 < 0.0);
  CHECK(std::abs(m20 / (-20.0 * std::tanh(std::log1p(std::exp(-20.0)))) - 1.0) < 1e-9);
  CHECK(std::abs(m20 / -4.1e-8 - 1.0) < 0.01);

  CHECK(asmix::swish(0.0) == 0.0);
  CHECK(asmix::swish(1.0) == Approx(0.731059).epsilon(1e-6));
  CHECK(asmix::swish(-1.0) == Approx(-0.268941).epsilon(1e-6));
}

TEST_CASE("stable softplus branches") {
  CHECK(asmix::softplus(25.0) == 25.0);
  CHECK(std::abs(asmix::softplus(-25.0) / std::exp(-25.0) - 1.0) < 1e-12);
  CHECK(asmix::softplus(0.0) == Approx(std::log(2.0)));
  CHECK(std::isfinite(asmix::mish(1000.0)));
  CHECK(asmix::mish(1000.0) == Approx(1000.0));
  CHECK(std::isfinite(asmix::mish(-1000.0)));
}

TEST_CASE("scalar activations agree with oracles") {
  asmix::Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    CHECK(asmix::gelu(x) == Approx(oracle::gelu(x)).epsilon(1e-12));
    CHECK(asmix::mish(x) == Approx(oracle::mish(x)).epsilon(1e-12));
    CHECK(asmix::swish(x) == Approx(oracle::swish(x)).epsilon(1e-12));
  }
}

TEST_CASE("scalar derivatives agree with central differences") {
  asmix::Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-5.0, 5.0), h = 1e-5;
    CHECK(asmix::gelu_grad(x) == Approx((oracle::gelu(x + h) - oracle::gelu(x - h)) / (2 * h)).epsilon(1e-6));
    CHECK(asmix::mish_grad(x) == Approx((oracle::mish(x + h) - oracle::mish(x - h)) / (2 * h)).epsilon(1e-6));
    CHECK(asmix::swish_grad(x) == Approx((oracle::swish(x + h) - oracle::swish(x - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("activation properties") {
  for (double x = 0.0; x <= 6.0; x += 0.05) {
    CHECK(asmix::swish(x) <= x);
    CHECK(asmix::gelu(x) <= x);
  }
  for (double x = -5.0; x < 0.0; x += 0.01) {
    CHECK(std::abs(asmix::gelu(x)) > 0.0);
    CHECK(std::abs(asmix::mish(x)) > 0.0);
    CHECK(std::abs(asmix::swish(x)) > 0.0);
  }
}

TEST_CASE("aconc on the tape") {
  asmix::Tape tape;
  using asmix::Tensor;
  SUBCASE("(1,0,1) reduces to swish on 1000 points") {
    asmix::Rng rng(2);
    std::vector<float> xs(1000);
    for (auto& v : xs) v = static_cast<float>(rng.uniform(-6.0, 6.0));
    Tensor x({1000, 1}, xs);
    Tensor y = asmix::aconc(tape, x, Tensor::full({1}, 1), Tensor::zeros({1}), Tensor::full({1}, 1));
    Tensor s = asmix::swish(tape, x);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(std::abs(y.data()[i] - s.data()[i]) < 1e-7);
  }
  SUBCASE("p1 == p2 is linear") {
    Tensor x({2, 2}, {-3, -0.5f, 0.25f, 4});
    Tensor c({2}, {0.7f, -1.5f});
    Tensor y = asmix::aconc(tape, x, c, c, Tensor::full({2}, 3));
    for (std::size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == Approx(c.data()[i % 2] * x.data()[i]));
  }
  SUBCASE("x=2 with (1,0,1)") {
    Tensor y = asmix::aconc(tape, Tensor({1}, {2}), Tensor::full({1}, 1), Tensor::zeros({1}),
                            Tensor::full({1}, 1));
    CHECK(y.item() == Approx(1.761594).epsilon(1e-6));
  }
  SUBCASE("zero at the origin for any parameters") {
    asmix::Rng rng(6);
    for (int i = 0; i < 20; ++i) {
      Tensor y = asmix::aconc(tape, Tensor({1}, {0}), Tensor::full({1}, float(rng.normal())),
                              Tensor::full({1}, float(rng.normal())),
                              Tensor::full({1}, float(rng.normal())));
      CHECK(y.item() == 0.0f);
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(asmix::aconc(tape, Tensor::zeros({2, 3}), Tensor::zeros({2}), Tensor::zeros({3}),
                                 Tensor::zeros({3})),
                    asmix::DimensionError);
  }
}

TEST_CASE("aconc_init") {
  SUBCASE("adapted stays near (1, 0)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      asmix::Rng rng(seed);
      auto p = asmix::aconc_init(512, true, rng);
      for (std::size_t j = 0; j < 512; ++j) {
        CHECK(std::abs(p.p1.data()[j] - 1.0f) < 0.1f);
        CHECK(std::abs(p.p2.data()[j]) < 0.1f);
        CHECK(p.beta.data()[j] == 1.0f);
      }
    }
  }
  SUBCASE("zero noise scale is exact") {
    asmix::Rng rng(3);
    auto p = asmix::aconc_init(16, true, rng, 0.0);
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(p.p1.data()[j] == 1.0f);
      CHECK(p.p2.data()[j] == 0.0f);
    }
  }
  SUBCASE("plain init draws standard normals") {
    asmix::Rng rng(5);
    auto p = asmix::aconc_init(4000, false, rng);
    double m = 0, v = 0;
    for (float x : p.p1.data()) m += x;
    m /= 4000;
    for (float x : p.p1.data()) v += (x - m) * (x - m);
    v /= 3999;
    CHECK(std::abs(m) < 0.1);
    CHECK(std::abs(v - 1.0) < 0.1);
    for (float b : p.beta.data()) CHECK(b == 1.0f);
  }
  SUBCASE("same seed is bit-identical") {
    asmix::Rng a(42), b(42);
    auto pa = asmix::aconc_init(64, true, a), pb = asmix::aconc_init(64, true, b);
    CHECK(std::vector<float>(pa.p1.data().begin(), pa.p1.data().end()) ==
          std::vector<float>(pb.p1.data().begin(), pb.p1.data().end()));
    CHECK(std::vector<float>(pa.p2.data().begin(), pa.p2.data().end()) ==
          std::vector<float>(pb.p2.data().begin(), pb.p2.data().end()));
  }
  SUBCASE("parameters are trainable") {
    asmix::Rng rng(1);
    auto p = asmix::aconc_init(3, false, rng);
    CHECK(p.p1.requires_grad());
    CHECK(p.p2.requires_grad());
    CHECK(p.beta.requires_grad());
  }
}

TEST_CASE("activation names") {
  for (const char* name : {"gelu", "mish", "swish", "aconc", "aconc-adapted"}) {
    auto k = asmix::parse_activation(name);
    REQUIRE(k.has_value());
    CHECK(asmix::activation_name(*k) == name);
  }
  CHECK(asmix::parse_activation("aconc-adapted")->adapted);
  CHECK_FALSE(asmix::parse_activation("relu").has_value());
  CHECK_FALSE(asmix::parse_activation("GELU").has_value());
  CHECK_FALSE(asmix::ActivationKind{asmix::ActivationTag::kMish, false}.has_params());
}

TEST_CASE("activate dispatches") {
  asmix::Tape tape;
  asmix::Tensor x({1, 3}, {-1, 0, 1});
  auto y = asmix::activate(tape, x, {asmix::ActivationTag::kSwish, false}, nullptr);
  CHECK(y.data()[2] == Approx(0.731059).epsilon(1e-6));
  CHECK_THROWS(asmix::activate(tape, x, {asmix::ActivationTag::kAconC, false}, nullptr));
}
