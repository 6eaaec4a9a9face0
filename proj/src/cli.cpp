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

#include "asmix/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"

#include "asmix/byte_io.hpp"
#include "asmix/checkpoint.hpp"
#include "asmix/config_json.hpp"
#include "asmix/error.hpp"
#include "asmix/run_config.hpp"
#include "asmix/train.hpp"

namespace asmix::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

void write_text(const fs::path& path, const std::string& text) {
  bytes::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

/// Prints rows as left-aligned first column and right-aligned rest.
void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
      }
    }
    out << '\n';
  }
  out << std::left;
}

std::string epochs_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,val_acc,val_auc,seconds\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << exact(r.lr) << ',' << exact(r.train_loss) << ','
       << exact(r.val_acc) << ',' << exact(r.val_auc) << ',' << fmt("%.3f", r.seconds)
       << '\n';
  }
  return os.str();
}

MixerConfig model_config_from_file(const fs::path& path) {
  return load_run_config(path).model;
}

struct LoadedData {
  Manifest manifest;
  std::vector<MelSpectrogram> features;
};

LoadedData load_data(const fs::path& manifest, const RunConfig& cfg) {
  LoadedData d;
  d.manifest = read_manifest(manifest);
  d.features = extract_features(d.manifest, cfg.frontend, cfg.jobs, cfg.cache_dir);
  return d;
}

// --- train -----------------------------------------------------------------

int cmd_train(RunConfig cfg, std::ostream& out) {
  validate_for_training(cfg);
  const fs::path dir = *cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "run.json", to_json(cfg).dump(2) + "\n");

  const LoadedData train_data = load_data(*cfg.train_manifest, cfg);
  const LoadedData val_data = load_data(*cfg.val_manifest, cfg);
  const FeatureStats stats = dataset_stats(train_data.features);
  if (stats.degenerate) {
    throw InputError("training features have zero variance; cannot normalize");
  }
  const Dataset train_set =
      make_dataset(train_data.features, train_data.manifest, stats.mean, stats.std);
  const Dataset val_set =
      make_dataset(val_data.features, val_data.manifest, stats.mean, stats.std);
  std::optional<Dataset> test_set;
  if (cfg.test_manifest) {
    const LoadedData test_data = load_data(*cfg.test_manifest, cfg);
    test_set = make_dataset(test_data.features, test_data.manifest, stats.mean, stats.std);
  }

  const Metadata base = {{"frontend", to_json(cfg.frontend).dump()},
                         {"norm.mean", exact(stats.mean)},
                         {"norm.std", exact(stats.std)}};

  std::vector<std::vector<std::string>> table{
      {"seed", "best_epoch", "val_acc", "val_auc", "test_acc", "test_auc"}};

  if (cfg.seeds.empty()) {
    Rng init = model_rng(cfg.train.seed);
    MixerModel model = MixerModel::build(cfg.model, init);
    TrainResult r = train(model, train_set, val_set, cfg.train, base);
    write_text(dir / "epochs.csv", epochs_csv(r.history));
    save_checkpoint(r.best, dir / "best.asmc");
    const auto& best = r.history[r.best_epoch - 1];
    std::vector<std::string> row{std::to_string(cfg.train.seed), std::to_string(r.best_epoch),
                                 fmt("%.4f", best.val_acc), fmt("%.4f", best.val_auc), "-", "-"};
    if (test_set) {
      const EvalResult t = evaluate(r.best.to_model(), *test_set);
      row[4] = fmt("%.4f", t.acc);
      row[5] = fmt("%.4f", t.auc);
    }
    table.push_back(row);
    print_table(out, table);
    return kExitOk;
  }

  if (!test_set) {
    throw ConfigError("data.test", "multi-seed runs report test metrics; add a test manifest");
  }
  std::ostringstream seeds_csv;
  seeds_csv << "seed,best_epoch,val_acc,val_auc,test_acc,test_auc\n";
  MultiSeedResult ms = multi_seed(
      cfg.model, cfg.train, cfg.seeds, train_set, val_set, *test_set, base,
      [&](const SeedRun& run) {
        const fs::path sd = dir / ("seed-" + std::to_string(run.seed));
        fs::create_directories(sd);
        write_text(sd / "epochs.csv", epochs_csv(run.result.history));
        save_checkpoint(run.result.best, sd / "best.asmc");
        const auto& best = run.result.history[run.result.best_epoch - 1];
        seeds_csv << run.seed << ',' << run.result.best_epoch << ',' << exact(best.val_acc)
                  << ',' << exact(best.val_auc) << ',' << exact(run.test_acc) << ','
                  << exact(run.test_auc) << '\n';
        table.push_back({std::to_string(run.seed), std::to_string(run.result.best_epoch),
                         fmt("%.4f", best.val_acc), fmt("%.4f", best.val_auc),
                         fmt("%.4f", run.test_acc), fmt("%.4f", run.test_auc)});
      });
  write_text(dir / "seeds.csv", seeds_csv.str());

  std::ostringstream summary;
  summary << "metric,mean,sd,formatted\n";
  auto add = [&](const char* name, const MetricSummary& s) {
    summary << name << ',' << exact(s.mean) << ',' << exact(s.sd) << ','
            << format_mean_sd(s) << '\n';
  };
  add("test_acc", ms.test_acc);
  add("test_auc", ms.test_auc);
  add("best_val_acc", ms.best_val_acc);
  write_text(dir / "summary.csv", summary.str());

  table.push_back({"mean±sd", "", "", "", format_mean_sd(ms.test_acc),
                   format_mean_sd(ms.test_auc)});
  print_table(out, table);
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const fs::path& ckpt_path, const fs::path& manifest_path,
             const std::optional<fs::path>& dump, unsigned jobs,
             const std::optional<fs::path>& cache, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  FrontendConfig fe;
  if (auto f = ckpt.meta("frontend")) {
    fe = frontend_config_from_json(Json::parse(*f));
  } else {
    fe.target_frames = ckpt.config.input_shape[0];
  }
  const auto mean = ckpt.meta("norm.mean");
  const auto std = ckpt.meta("norm.std");
  if (!mean || !std) {
    throw InputError("checkpoint lacks norm.mean/norm.std metadata");
  }
  if (ckpt.config.input_shape[0] != fe.target_frames ||
      ckpt.config.input_shape[1] != kMelBins) {
    throw InputError("checkpoint input shape " +
                     shape_str({ckpt.config.input_shape[0], ckpt.config.input_shape[1]}) +
                     " does not match the front end (" + std::to_string(fe.target_frames) +
                     " x 128)");
  }
  const Manifest manifest = read_manifest(manifest_path);
  const auto features = extract_features(manifest, fe, jobs, cache);
  const Dataset data = make_dataset(features, manifest, std::stod(*mean), std::stod(*std));
  const EvalResult r = evaluate(ckpt.to_model(), data);
  out << "acc=" << fmt("%.4f", r.acc) << " auc=" << fmt("%.4f", r.auc) << '\n';

  if (dump) {
    std::ostringstream os;
    const std::size_t c = r.logits.dim(1);
    os << "path,label";
    for (std::size_t k = 0; k < c; ++k) os << ",logit_" << k;
    os << '\n';
    const fs::path base = manifest.source.parent_path();
    for (std::size_t i = 0; i < data.size(); ++i) {
      os << manifest.entries[i].path.lexically_relative(base).generic_string() << ','
         << data.labels[i];
      for (std::size_t k = 0; k < c; ++k) os << ',' << exact(r.logits.at(i, k));
      os << '\n';
    }
    write_text(*dump, os.str());
  }
  return kExitOk;
}

// --- convert ---------------------------------------------------------------

int cmd_convert(const fs::path& source, const std::string& mode_name,
                const fs::path& out_path, const std::optional<fs::path>& config,
                std::uint64_t seed, std::ostream& out) {
  const auto mode = parse_gray_mode(mode_name);
  if (!mode) throw ConfigError("mode", "got '" + mode_name + "'; allowed values: luma|sum");
  const auto bytes = bytes::read_file(source);
  const TensorContainer container = decode_container(bytes);
  const RgbProjectionWeights rgb = rgb_projection_from(container);

  MixerConfig target;
  if (config) {
    target = model_config_from_file(*config);
  } else {
    target.patch = rgb.patch;
    target.stride = rgb.patch;
    target.dim = rgb.weight.shape().back();
  }
  Rng rng = model_rng(seed);
  ImportedModel imported = import_foreign(bytes, target, *mode, rng);
  save_checkpoint(Checkpoint::from_model(imported.model, imported.metadata), out_path);

  const auto coef = gray_coefficients(*mode);
  out << "mode=" << gray_mode_name(*mode) << " coefficients R=" << fmt("%.3f", coef[0])
      << " G=" << fmt("%.3f", coef[1]) << " B=" << fmt("%.3f", coef[2]) << '\n';
  out << "source_sha256=" << sha256_hex(bytes) << '\n';
  out << "wrote " << out_path.string() << '\n';
  return kExitOk;
}

// --- params ----------------------------------------------------------------

int cmd_params(const fs::path& config, std::ostream& out) {
  const MixerConfig cfg = model_config_from_file(config);
  std::vector<std::vector<std::string>> rows{{"component", "parameters"}};
  std::size_t total = 0;
  for (const auto& g : param_breakdown(cfg)) {
    rows.push_back({g.component, std::to_string(g.count)});
    total += g.count;
  }
  rows.push_back({"total", std::to_string(total)});
  print_table(out, rows);
  return kExitOk;
}

// --- features --------------------------------------------------------------

int cmd_features(const fs::path& manifest_path, const fs::path& cache_dir,
                 const std::optional<fs::path>& config, unsigned jobs, std::ostream& out) {
  FrontendConfig fe;
  if (config) fe = load_run_config(*config).frontend;
  const Manifest manifest = read_manifest(manifest_path);
  extract_features(manifest, fe, jobs, cache_dir);
  out << "cached " << manifest.entries.size() << " clips under "
      << feature_cache_path(cache_dir, manifest, manifest.entries.front(), fe)
             .parent_path()
             .string()
      << '\n';
  return kExitOk;
}

}  // namespace

SynthOutput synth_dataset(const fs::path& out, int classes, int per_class,
                          std::uint64_t seed) {
  if (classes < 2) throw ConfigError("classes", "must be >= 2");
  if (per_class < 2) throw ConfigError("per_class", "must be >= 2");
  const fs::path wav_dir = out / "wav";
  fs::create_directories(wav_dir);

  const int n_val = std::max(1, per_class / 5);
  const int n_test = per_class / 5;
  const int n_train = per_class - n_val - n_test;
  std::vector<ManifestEntry> train, val, test;
  Rng root(seed);
  constexpr int kRate = 16000;
  for (int k = 0; k < classes; ++k) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng = root.fork(static_cast<std::uint64_t>(k) * 1000003u + i);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double w = 2.0 * std::numbers::pi * synth_frequency(k) / kRate;
      AudioClip clip;
      clip.sample_rate = kRate;
      clip.samples.resize(kRate);
      for (int t = 0; t < kRate; ++t) {
        clip.samples[t] = static_cast<float>(0.5 * std::sin(w * t + phase) +
                                             rng.uniform(-0.05, 0.05));
      }
      char name[64];
      std::snprintf(name, sizeof name, "class%d_%03d.wav", k, i);
      const fs::path path = wav_dir / name;
      write_wav_file(path, clip);
      ManifestEntry e{fs::absolute(path), k};
      if (i < n_train) {
        train.push_back(e);
      } else if (i < n_train + n_val) {
        val.push_back(e);
      } else {
        test.push_back(e);
      }
    }
  }
  SynthOutput o;
  o.train_manifest = out / "train.csv";
  o.val_manifest = out / "val.csv";
  o.test_manifest = out / "test.csv";
  write_manifest(o.train_manifest, train);
  write_manifest(o.val_manifest, val);
  write_manifest(o.test_manifest, test);
  o.clips = static_cast<std::size_t>(classes) * per_class;
  return o;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio spectrogram mixer: features, training, evaluation, conversion"};
  app.name(args.empty() ? "asm" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  int synth_classes = 3, synth_per_class = 20;
  std::uint64_t seed = 0;
  std::string out_dir, config_path, checkpoint_path, manifest_path, mode = "luma",
                                                                     seeds_list;
  std::string dump_path, cache_dir, source_path;
  unsigned jobs = 0;

  auto* synth = app.add_subcommand("synth", "generate the synthetic sine dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--classes", synth_classes, "number of classes");
  synth->add_option("--per-class", synth_per_class, "clips per class");
  synth->add_option("--seed", seed, "generator seed");

  auto* train_cmd = app.add_subcommand("train", "train (or multi-seed train) from a config");
  train_cmd->add_option("--config", config_path, "run config (JSON)")->required();
  auto* train_seed = train_cmd->add_option("--seed", seed, "override train.seed");
  train_cmd->add_option("--seeds", seeds_list, "comma-separated seeds for a multi-seed run");
  train_cmd->add_option("--out", out_dir, "override output_dir");
  train_cmd->add_option("--jobs", jobs, "feature extraction threads");
  train_cmd->add_option("--cache", cache_dir, "ASMF feature cache directory");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a manifest");
  eval->add_option("--checkpoint,checkpoint", checkpoint_path, "checkpoint (.asmc)")
      ->required();
  eval->add_option("--manifest,manifest", manifest_path, "manifest CSV")->required();
  eval->add_option("--dump-logits", dump_path, "write per-clip logits CSV");
  eval->add_option("--jobs", jobs, "feature extraction threads");
  eval->add_option("--cache", cache_dir, "ASMF feature cache directory");

  auto* convert = app.add_subcommand("convert", "convert a 3-channel patch projection");
  convert->add_option("--source,source", source_path, "3-channel source checkpoint")
      ->required();
  convert->add_option("--mode", mode, "luma|sum");
  convert->add_option("--out", out_dir, "output checkpoint path")->required();
  convert->add_option("--config", config_path, "target model config");
  convert->add_option("--seed", seed, "seed for the freshly initialized layers");

  auto* params = app.add_subcommand("params", "print the parameter count breakdown");
  params->add_option("--config,config", config_path, "config with a model section")
      ->required();

  auto* features = app.add_subcommand("features", "materialize the ASMF feature cache");
  features->add_option("--manifest,manifest", manifest_path, "manifest CSV")->required();
  features->add_option("--out,--cache", cache_dir, "cache directory")->required();
  features->add_option("--config", config_path, "config with a frontend section");
  features->add_option("--jobs", jobs, "threads");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto opt_path = [](const std::string& s) -> std::optional<fs::path> {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
  };

  try {
    if (*synth) {
      const auto o = synth_dataset(out_dir, synth_classes, synth_per_class, seed);
      out << "wrote " << o.clips << " clips; manifests " << o.train_manifest.string() << ", "
          << o.val_manifest.string() << ", " << o.test_manifest.string() << '\n';
      return kExitOk;
    }
    if (*train_cmd) {
      RunConfig cfg = load_run_config(config_path);
      if (train_seed->count() > 0) cfg.train.seed = seed;
      if (!seeds_list.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(seeds_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            cfg.seeds.push_back(std::stoull(item));
          } catch (const std::exception&) {
            throw ConfigError("seeds", "'" + item + "' is not an unsigned integer");
          }
        }
        if (cfg.seeds.size() < 2) throw ConfigError("seeds", "need at least two seeds");
      }
      if (!out_dir.empty()) cfg.output_dir = fs::absolute(out_dir);
      if (jobs > 0) cfg.jobs = jobs;
      if (!cache_dir.empty()) cfg.cache_dir = fs::absolute(cache_dir);
      return cmd_train(std::move(cfg), out);
    }
    if (*eval) {
      return cmd_eval(checkpoint_path, manifest_path, opt_path(dump_path),
                      std::max(1u, jobs), opt_path(cache_dir), out);
    }
    if (*convert) {
      return cmd_convert(source_path, mode, out_dir, opt_path(config_path), seed, out);
    }
    if (*params) return cmd_params(config_path, out);
    if (*features) {
      return cmd_features(manifest_path, cache_dir, opt_path(config_path),
                          std::max(1u, jobs), out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace asmix::cli
