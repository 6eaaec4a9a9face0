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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "asmix/error.hpp"
#include "asmix/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace asmix;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Tensor matrix(std::size_t n, std::size_t c, const std::vector<double>& v) {
  return Tensor({n, c}, std::vector<float>(v.begin(), v.end()));
}

MixerConfig tiny() {
  MixerConfig c;
  c.patch = {2, 2};
  c.stride = {2, 2};
  c.input_shape = {4, 4};
  c.dim = 8;
  c.depth = 1;
  c.token_hidden = 4;
  c.channel_hidden = 8;
  c.num_classes = 3;
  return c;
}

// Class k lights up row k of a 4x4 grid; everything else is small noise.
Dataset toy(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int k = 0; k < 3; ++k) {
      std::vector<float> g(16);
      for (auto& v : g) v = static_cast<float>(rng.uniform(-0.3, 0.3));
      for (std::size_t j = 0; j < 4; ++j) g[k * 4 + j] += 1.5f;
      d.inputs.emplace_back(Shape{4, 4}, std::move(g));
      d.labels.push_back(k);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("lr_at") {
  TrainConfig cfg;
  for (int e = 1; e <= 5; ++e) CHECK(lr_at(e, cfg) == 2.5e-4);
  CHECK(rel(lr_at(6, cfg), 2.125e-4) < 1e-12);
  CHECK(rel(lr_at(30, cfg), 2.5e-4 * std::pow(0.85, 25)) < 1e-12);
  cfg.lr0 = 1e-4;
  CHECK(rel(lr_at(8, cfg), 6.14125e-5) < 1e-12);
  for (int e = 1; e < 60; ++e) CHECK(lr_at(e + 1, cfg) <= lr_at(e, cfg));
  CHECK_THROWS_AS(lr_at(0, cfg), InputError);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  auto field = [](TrainConfig t) {
    try {
      t.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  c.lr0 = 0;
  CHECK(field(c) == "train.lr0");
  c = {};
  c.decay = 1.5;
  CHECK(field(c) == "train.decay");
  c = {};
  c.epochs = 0;
  CHECK(field(c) == "train.epochs");
  c = {};
  c.batch_size = 0;
  CHECK(field(c) == "train.batch_size");
  c = {};
  c.decay = 1.0;
  CHECK(field(c).empty());
}

TEST_CASE("Adam") {
  SUBCASE("first step moves by lr against the gradient sign") {
    Tensor p({4}, {0.5f, -1.0f, 2.0f, 0.0f}, true);
    const float g[] = {0.1f, -0.7f, 3.0f, -0.25f};
    std::copy(g, g + 4, p.grad_buffer().begin());
    std::vector<float> before(p.data().begin(), p.data().end());
    Adam opt({p});
    opt.step(1e-3);
    for (int i = 0; i < 4; ++i) {
      const double delta = double(p.data()[i]) - before[i];
      CHECK(std::abs(delta + 1e-3 * (g[i] > 0 ? 1 : -1)) < 1e-3 * 1e-3);
    }
    CHECK(opt.timestep() == 1);
  }
  SUBCASE("zero gradient leaves parameters and moments alone") {
    Tensor p({3}, {1, 2, 3}, true);
    p.grad_buffer();
    Adam opt({p});
    opt.step(0.1);
    CHECK(std::vector<float>(p.data().begin(), p.data().end()) == std::vector<float>{1, 2, 3});
    for (double m : opt.first_moment(0)) CHECK(m == 0.0);
    for (double v : opt.second_moment(0)) CHECK(v == 0.0);
  }
  SUBCASE("minimizes theta squared") {
    Tensor p({1}, {1.0f}, true);
    Adam opt({p});
    for (int i = 0; i < 100; ++i) {
      Tape tape;
      p.zero_grad();
      tape.backward(tape.sum(tape.mul(p, p)));
      opt.step(0.1);
    }
    CHECK(std::abs(p.item()) < 0.05);
  }
  SUBCASE("matches a scalar reference update") {
    Tensor p({2}, {0.3f, -0.8f}, true);
    Adam opt({p}, 0.9, 0.999, 1e-8);
    double th[2] = {0.3f, -0.8f}, m[2] = {0, 0}, v[2] = {0, 0};
    Rng rng(3);
    for (int t = 1; t <= 20; ++t) {
      auto gb = p.grad_buffer();
      for (int i = 0; i < 2; ++i) gb[i] = static_cast<float>(rng.uniform(-1, 1));
      for (int i = 0; i < 2; ++i) {
        const double g = gb[i];
        m[i] = 0.9 * m[i] + 0.1 * g;
        v[i] = 0.999 * v[i] + 0.001 * g * g;
        const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
        th[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
      opt.step(0.01);
      for (int i = 0; i < 2; ++i) CHECK(std::abs(p.data()[i] - th[i]) < 1e-6);
    }
  }
}

TEST_CASE("accuracy") {
  const int labels[] = {0, 1, 2};
  CHECK(accuracy(matrix(3, 3, {5, 0, 0, 0, 5, 0, 0, 0, 5}), labels) == 1.0);
  const int zeros[] = {0, 0, 0};
  CHECK(accuracy(matrix(3, 3, std::vector<double>(9, 0.5)), zeros) == 1.0);
  CHECK(accuracy(matrix(3, 3, std::vector<double>(9, 0.5)), labels) == doctest::Approx(1.0 / 3));

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(50 * 4);
    for (auto& v : s) v = std::round(rng.uniform(0, 4));  // plenty of ties
    std::vector<int> y(50);
    for (auto& v : y) v = static_cast<int>(rng.below(4));
    Tensor t = matrix(50, 4, s);
    const double a = accuracy(t, y);
    CHECK(a == oracle::accuracy(oracle::from(t), y));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    // Row order does not matter.
    std::vector<std::size_t> perm(50);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<double> ps(s.size());
    std::vector<int> py(50);
    for (std::size_t i = 0; i < 50; ++i) {
      std::copy_n(s.begin() + perm[i] * 4, 4, ps.begin() + i * 4);
      py[i] = y[perm[i]];
    }
    CHECK(accuracy(matrix(50, 4, ps), py) == a);
  }
}

TEST_CASE("auc_macro") {
  SUBCASE("perfect separation") {
    const int y[] = {0, 1, 2, 0};
    Tensor s = matrix(4, 3, {0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6, 0.7, 0.2, 0.1});
    CHECK(auc_macro(s, y).value == 1.0);
  }
  SUBCASE("all ties") {
    const int y[] = {0, 1, 2, 1, 0};
    CHECK(auc_macro(matrix(5, 3, std::vector<double>(15, 1.0 / 3)), y).value == 0.5);
  }
  SUBCASE("classes without positives are skipped and reported") {
    const int y[] = {0, 1, 0, 1};
    AucResult r = auc_macro(matrix(4, 3, {0.6, 0.3, 0.1, 0.2, 0.7, 0.1, 0.5, 0.4, 0.1, 0.4, 0.5, 0.1}), y);
    CHECK(r.skipped_classes == std::vector<int>{2});
    CHECK(r.value == 1.0);
  }
  SUBCASE("undefined when every class is one-sided") {
    const int y[] = {0, 0};
    CHECK_THROWS_AS(auc_macro(matrix(2, 2, {0.5, 0.5, 0.4, 0.6}), y), InputError);
  }
  SUBCASE("random instances match pair counting") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + rng.below(49), c = 2 + rng.below(4);
      std::vector<double> s(n * c);
      for (auto& v : s) v = std::round(rng.uniform(0, 8)) / 8;
      std::vector<int> y(n);
      for (auto& v : y) v = static_cast<int>(rng.below(c));
      if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) y[0] = (y[0] + 1) % c;
      Tensor t = matrix(n, c, s);
      const double got = auc_macro(t, y).value;
      CHECK(std::abs(got - oracle::auc_pairs(oracle::from(t), y)) < 1e-9);
      CHECK(got >= 0.0);
      CHECK(got <= 1.0);
    }
  }
}

TEST_CASE("softmax_rows") {
  Tensor p = softmax_rows(matrix(2, 3, {1000, 0, -1000, 1, 2, 3}));
  CHECK(p.at(0, 0) == doctest::Approx(1.0));
  double s = p.at(1, 0) + p.at(1, 1) + p.at(1, 2);
  CHECK(s == doctest::Approx(1.0));
  CHECK(p.at(1, 2) > p.at(1, 1));
}

TEST_CASE("summaries") {
  const double same[] = {0.8, 0.8, 0.8};
  CHECK(format_mean_sd(summarize(same)) == "0.8000±0.0000");
  const double three[] = {0.90, 0.92, 0.94};
  MetricSummary s = summarize(three);
  CHECK(s.mean == doctest::Approx(0.92));
  CHECK(s.sd == doctest::Approx(0.02));
  CHECK(format_mean_sd(s) == "0.9200±0.0200");
}

TEST_CASE("train") {
  MixerConfig mc = tiny();
  Dataset tr = toy(8, 1), va = toy(3, 2);
  TrainConfig cfg;
  cfg.lr0 = 1e-2;
  cfg.epochs = 12;
  cfg.batch_size = 4;
  cfg.seed = 5;

  SUBCASE("single epoch returns that epoch") {
    TrainConfig one = cfg;
    one.epochs = 1;
    Rng init = model_rng(1);
    MixerModel m = MixerModel::build(mc, init);
    TrainResult r = train(m, tr, va, one, {{"k", "v"}});
    CHECK(r.best_epoch == 1);
    CHECK(r.history.size() == 1);
    CHECK(r.best.meta("k") == "v");
    CHECK(r.best.meta("epoch") == "1");
    CHECK(r.best.meta("seed") == "5");
    CHECK(r.history[0].seconds == 0.0);
  }
  SUBCASE("learns, is deterministic and keeps the best epoch") {
    std::vector<EpochRecord> seen;
    Rng a = model_rng(1), b = model_rng(1);
    MixerModel m1 = MixerModel::build(mc, a), m2 = MixerModel::build(mc, b);
    TrainResult r1 = train(m1, tr, va, cfg, {}, [&](const EpochRecord& e) { seen.push_back(e); });
    TrainResult r2 = train(m2, tr, va, cfg);
    CHECK(r1.history == r2.history);
    CHECK(r1.history == seen);
    CHECK(encode_checkpoint(r1.best) == encode_checkpoint(r2.best));
    CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
    CHECK(evaluate(m1, tr).acc == 1.0);

    int expect = 1;
    for (const auto& e : r1.history) {
      CHECK(e.lr == lr_at(e.epoch, cfg));
      CHECK(e.val_acc >= 0.0);
      CHECK(e.val_acc <= 1.0);
      CHECK(e.val_auc >= 0.0);
      CHECK(e.val_auc <= 1.0);
      const auto& b = r1.history[expect - 1];
      if (e.val_acc > b.val_acc || (e.val_acc == b.val_acc && e.val_auc > b.val_auc)) expect = e.epoch;
    }
    CHECK(r1.best_epoch == expect);
    // The retained checkpoint reproduces its recorded validation metrics.
    EvalResult ev = evaluate(r1.best.to_model(), va);
    CHECK(ev.acc == r1.history[expect - 1].val_acc);
    CHECK(ev.auc == r1.history[expect - 1].val_auc);
  }
  SUBCASE("shape mismatch fails before any step") {
    Rng init = model_rng(1);
    MixerModel m = MixerModel::build(mc, init);
    const auto before = oracle::vec(m.patch_weight);
    Dataset bad = tr;
    bad.inputs[3] = Tensor::zeros({4, 5});
    CHECK_THROWS_AS(train(m, bad, va, cfg), InputError);
    Dataset bad_label = tr;
    bad_label.labels[0] = 3;
    CHECK_THROWS_AS(train(m, bad_label, va, cfg), InputError);
    CHECK(oracle::vec(m.patch_weight) == before);
  }
}

TEST_CASE("evaluate agrees with oracles on its logits") {
  Rng init = model_rng(4);
  MixerModel m = MixerModel::build(tiny(), init);
  Dataset d = toy(5, 9);
  EvalResult a = evaluate(m, d), b = evaluate(m, d);
  CHECK(a.acc == b.acc);
  CHECK(a.auc == b.auc);
  CHECK(oracle::vec(a.logits) == oracle::vec(b.logits));
  const auto l = oracle::from(a.logits);
  CHECK(a.acc == oracle::accuracy(l, d.labels));
  CHECK(std::abs(a.auc - oracle::auc_pairs(oracle::from(softmax_rows(a.logits)), d.labels)) < 1e-9);
}

TEST_CASE("multi_seed") {
  Dataset tr = toy(4, 1), va = toy(2, 2), te = toy(2, 3);
  TrainConfig cfg;
  cfg.lr0 = 1e-2;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  const std::uint64_t seeds[] = {1, 2, 3};
  MultiSeedResult r = multi_seed(tiny(), cfg, seeds, tr, va, te);
  REQUIRE(r.runs.size() == 3);
  std::vector<double> acc, auc;
  for (const auto& run : r.runs) {
    acc.push_back(run.test_acc);
    auc.push_back(run.test_auc);
    EvalResult again = evaluate(run.result.best.to_model(), te);
    CHECK(again.acc == run.test_acc);
  }
  CHECK(r.test_acc.mean == summarize(acc).mean);
  CHECK(r.test_acc.sd == summarize(acc).sd);
  CHECK(r.test_auc.mean == summarize(auc).mean);
  CHECK(r.runs[1].seed == 2);
  CHECK_THROWS_AS(multi_seed(tiny(), cfg, std::span(seeds, 1), tr, va, te), InputError);
}
