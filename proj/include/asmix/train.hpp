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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asmix/audio.hpp"
#include "asmix/checkpoint.hpp"
#include "asmix/mixer.hpp"
#include "asmix/rng.hpp"
#include "asmix/tensor.hpp"

namespace asmix {

struct TrainConfig {
  double lr0 = 2.5e-4;
  double decay = 0.85;
  int decay_start_epoch = 5;  // last epoch run at lr0
  int epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Wall-clock seconds go into EpochRecord/epochs.csv only when set; left
  /// off, the column is 0 so reruns produce identical files.
  bool record_timing = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_auc = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// lr0 for epochs 1..decay_start_epoch, then lr0 * decay^(epoch - start).
double lr_at(int epoch, const TrainConfig& cfg);

/// Bias-corrected adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// One update from the parameters' current gradients. Parameters without
  /// a gradient buffer are treated as having zero gradient.
  void step(double lr);

  std::int64_t timestep() const { return t_; }
  std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Row-wise softmax of an [n x C] matrix.
Tensor softmax_rows(const Tensor& logits);

/// Fraction of rows whose argmax equals the label; ties go to the lowest index.
double accuracy(const Tensor& logits, std::span<const int> labels);

struct AucResult {
  double value = 0.0;
  std::vector<int> skipped_classes;  // lacked positives or negatives
};

/// Macro one-vs-rest ROC AUC via the Mann-Whitney rank statistic with
/// average ranks for ties. Throws InputError when no class is scorable.
AucResult auc_macro(const Tensor& scores, std::span<const int> labels);

/// Model-ready inputs: one (T x F) grid per example plus its class.
struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Normalizes each spectrogram with (mean, std) and pairs it with the
/// manifest label of the same row.
Dataset make_dataset(std::span<const MelSpectrogram> specs,
                     const Manifest& manifest, double mean, double std);

/// Seeded streams used by the pipeline: one for weight init, one for
/// shuffling. Both derive from the run seed.
Rng model_rng(std::uint64_t seed);
Rng shuffle_rng(std::uint64_t seed);

struct EvalResult {
  double acc = 0.0;
  double auc = 0.0;
  Tensor logits;  // [n x C]
};

EvalResult evaluate(const MixerModel& model, const Dataset& data);

struct TrainResult {
  Checkpoint best;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch cross-entropy training with Adam and the stepped schedule.
/// After each epoch the validation set is scored; the retained checkpoint is
/// the epoch with the best val_acc, then val_auc, then the earliest.
/// `base_metadata` is copied into the best checkpoint ahead of the run
/// fields (seed, epoch, val_acc, val_auc).
TrainResult train(MixerModel& model, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg,
                  const Metadata& base_metadata = {},
                  const EpochCallback& on_epoch = {});

/// Mean and sample (n-1) standard deviation.
struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
};
MetricSummary summarize(std::span<const double> values);
/// "0.9200±0.0200"
std::string format_mean_sd(const MetricSummary& s);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
  double test_acc = 0.0;
  double test_auc = 0.0;
};

struct MultiSeedResult {
  std::vector<SeedRun> runs;
  MetricSummary test_acc;
  MetricSummary test_auc;
  MetricSummary best_val_acc;
};

/// Trains a freshly initialized model per seed and scores its best
/// checkpoint on `test_set`. Needs at least two seeds.
MultiSeedResult multi_seed(const MixerConfig& model_cfg, const TrainConfig& cfg,
                           std::span<const std::uint64_t> seeds,
                           const Dataset& train_set, const Dataset& val_set,
                           const Dataset& test_set,
                           const Metadata& base_metadata = {},
                           const std::function<void(const SeedRun&)>& on_seed = {});

}  // namespace asmix
