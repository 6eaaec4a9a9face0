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

#include "asmix/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "asmix/error.hpp"

namespace asmix {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0", "must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("train.decay", "must lie in (0, 1]");
  }
  if (decay_start_epoch < 0) {
    throw ConfigError("train.decay_start_epoch", "must be >= 0");
  }
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps", "must be > 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw InputError("lr_at: epochs are 1-based");
  if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
  return cfg.lr0 * std::pow(cfg.decay, epoch - cfg.decay_start_epoch);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] = static_cast<float>(w[k] - lr * mhat / (std::sqrt(vhat) + eps_));
    }
    check_finite(w, "adam_step");
  }
}

// ---------------------------------------------------------------------------
// Metrics

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax_rows: expected a matrix");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto l = logits.data();
  std::vector<float> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = l[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, double(l[i * c + j]));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(l[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = static_cast<float>(std::exp(l[i * c + j] - mx) / z);
    }
  }
  return Tensor({n, c}, std::move(out));
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw InputError("accuracy: need [n x C] logits with n == labels >= 1");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto l = logits.data();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = l.data() + i * c;
    const auto best = static_cast<int>(std::max_element(row, row + c) - row);
    if (best == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

AucResult auc_macro(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size() || labels.empty()) {
    throw InputError("auc_macro: need [n x C] scores with n == labels >= 1");
  }
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  auto s = scores.data();
  AucResult result;
  double total = 0.0;
  int scored = 0;
  std::vector<std::size_t> order(n);
  std::vector<double> rank(n);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t pos = 0;
    for (int label : labels) pos += static_cast<std::size_t>(label) == k;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
      result.skipped_classes.push_back(static_cast<int>(k));
      continue;
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return s[a * c + k] < s[b * c + k];
    });
    // Average 1-based ranks across runs of tied scores.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && s[order[j + 1] * c + k] == s[order[i] * c + k]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t r = i; r <= j; ++r) rank[order[r]] = avg;
      i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(labels[i]) == k) pos_rank_sum += rank[i];
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(neg);
    total += (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
    ++scored;
  }
  if (scored == 0) {
    throw InputError("auc_macro: no class has both positive and negative examples");
  }
  result.value = total / scored;
  return result;
}

// ---------------------------------------------------------------------------
// Training

Dataset make_dataset(std::span<const MelSpectrogram> specs,
                     const Manifest& manifest, double mean, double std) {
  if (specs.size() != manifest.entries.size()) {
    throw InputError("make_dataset: feature count does not match manifest rows");
  }
  Dataset d;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    d.inputs.push_back(normalize(specs[i], mean, std).to_tensor());
    d.labels.push_back(manifest.entries[i].label);
  }
  return d;
}

Rng model_rng(std::uint64_t seed) { return Rng(seed).fork(1); }
Rng shuffle_rng(std::uint64_t seed) { return Rng(seed).fork(2); }

namespace {

void check_dataset(const Dataset& d, const MixerConfig& cfg, const char* which) {
  if (d.inputs.size() != d.labels.size()) {
    throw InputError(std::string(which) + ": inputs and labels differ in length");
  }
  if (d.size() == 0) throw InputError(std::string(which) + ": dataset is empty");
  const Shape expected{cfg.input_shape[0], cfg.input_shape[1]};
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.inputs[i].shape() != expected) {
      throw InputError(std::string(which) + ": example " + std::to_string(i) +
                       " has shape " + shape_str(d.inputs[i].shape()) +
                       ", model expects " + shape_str(expected));
    }
    if (d.labels[i] < 0 || static_cast<std::size_t>(d.labels[i]) >= cfg.num_classes) {
      throw InputError(std::string(which) + ": label " + std::to_string(d.labels[i]) +
                       " outside [0, " + std::to_string(cfg.num_classes) + ")");
    }
  }
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvalResult evaluate(const MixerModel& model, const Dataset& data) {
  check_dataset(data, model.config(), "evaluate");
  Tape tape = Tape::inference();
  std::vector<Tensor> rows;
  rows.reserve(data.size());
  for (const auto& x : data.inputs) {
    rows.push_back(model.forward(tape, x));
    tape.clear();
  }
  EvalResult r;
  r.logits = tape.stack_rows(rows);
  r.acc = accuracy(r.logits, data.labels);
  r.auc = auc_macro(softmax_rows(r.logits), data.labels).value;
  return r;
}

TrainResult train(MixerModel& model, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg,
                  const Metadata& base_metadata, const EpochCallback& on_epoch) {
  cfg.validate();
  check_dataset(train_set, model.config(), "train");
  check_dataset(val_set, model.config(), "validation");
  {
    std::vector<int> distinct(val_set.labels);
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      throw InputError("validation: needs at least two classes for AUC");
    }
  }

  std::vector<Tensor> params;
  for (auto& [name, t] : model.parameters()) params.push_back(t);
  Adam opt(params, cfg.beta1, cfg.beta2, cfg.eps);
  Rng rng = shuffle_rng(cfg.seed);

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_acc = 0.0, best_auc = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Tape tape;
      std::vector<Tensor> logits;
      std::vector<int> labels;
      for (std::size_t i = b; i < e; ++i) {
        logits.push_back(model.forward(tape, train_set.inputs[order[i]]));
        labels.push_back(train_set.labels[order[i]]);
      }
      Tensor loss = tape.cross_entropy(tape.stack_rows(logits), labels);
      model.zero_grad();
      tape.backward(loss);
      opt.step(lr);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(e - b);
    }

    const EvalResult val = evaluate(model, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_acc = val.acc;
    rec.val_auc = val.auc;
    if (cfg.record_timing) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                  start)
                        .count();
    }
    result.history.push_back(rec);

    const bool better = result.best_epoch == 0 || rec.val_acc > best_acc ||
                        (rec.val_acc == best_acc && rec.val_auc > best_auc);
    if (better) {
      Metadata meta = base_metadata;
      meta.emplace_back("seed", std::to_string(cfg.seed));
      meta.emplace_back("epoch", std::to_string(epoch));
      meta.emplace_back("val_acc", fmt_real(rec.val_acc));
      meta.emplace_back("val_auc", fmt_real(rec.val_auc));
      result.best = Checkpoint::from_model(model, std::move(meta));
      result.best_epoch = epoch;
      best_acc = rec.val_acc;
      best_auc = rec.val_auc;
    }
    if (on_epoch) on_epoch(rec);
  }
  model.zero_grad();
  return result;
}

// ---------------------------------------------------------------------------
// Multi-seed

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string format_mean_sd(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f±%.4f", s.mean, s.sd);
  return buf;
}

MultiSeedResult multi_seed(const MixerConfig& model_cfg, const TrainConfig& cfg,
                           std::span<const std::uint64_t> seeds,
                           const Dataset& train_set, const Dataset& val_set,
                           const Dataset& test_set, const Metadata& base_metadata,
                           const std::function<void(const SeedRun&)>& on_seed) {
  if (seeds.size() < 2) {
    throw InputError("multi_seed: need at least two seeds for a standard deviation");
  }
  MultiSeedResult out;
  std::vector<double> accs, aucs, vals;
  for (std::uint64_t seed : seeds) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    Rng init = model_rng(seed);
    MixerModel model = MixerModel::build(model_cfg, init);
    SeedRun run;
    run.seed = seed;
    run.result = train(model, train_set, val_set, run_cfg, base_metadata);
    const EvalResult test = evaluate(run.result.best.to_model(), test_set);
    run.test_acc = test.acc;
    run.test_auc = test.auc;
    accs.push_back(run.test_acc);
    aucs.push_back(run.test_auc);
    vals.push_back(run.result.history[run.result.best_epoch - 1].val_acc);
    if (on_seed) on_seed(run);
    out.runs.push_back(std::move(run));
  }
  out.test_acc = summarize(accs);
  out.test_auc = summarize(aucs);
  out.best_val_acc = summarize(vals);
  return out;
}

}  // namespace asmix
