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

#include "asmix/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "asmix/error.hpp"

namespace asmix {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const Json& j, const std::string& where,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

fs::path get_path(const Json& v, const std::string& field, const fs::path& base) {
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ConfigError(field, "expected a non-empty path string");
  }
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

template <typename T>
T get_number(const Json& v, const std::string& field) {
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<long long>() < 0 && !v.is_number_unsigned()) {
        throw ConfigError(field, "must be non-negative");
      }
    }
  } else if (!v.is_number()) {
    throw ConfigError(field, "expected a number");
  }
  return v.get<T>();
}

}  // namespace

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  reject_unknown(j, "", {"frontend", "model", "train", "data", "output_dir",
                         "cache_dir", "jobs"});
  RunConfig cfg;
  if (j.contains("frontend")) cfg.frontend = frontend_config_from_json(j["frontend"]);

  Json model = j.contains("model") ? j["model"] : Json::object();
  if (model.is_object() && !model.contains("input_shape")) {
    model["input_shape"] = {cfg.frontend.target_frames, kMelBins};
  }
  cfg.model = mixer_config_from_json(model, "model");

  if (j.contains("train")) {
    const Json& t = j["train"];
    reject_unknown(t, "train",
                   {"lr0", "decay", "decay_start_epoch", "epochs", "batch_size",
                    "seed", "seeds", "beta1", "beta2", "eps", "record_timing"});
    auto& tc = cfg.train;
    if (t.contains("lr0")) tc.lr0 = get_number<double>(t["lr0"], "train.lr0");
    if (t.contains("decay")) tc.decay = get_number<double>(t["decay"], "train.decay");
    if (t.contains("decay_start_epoch")) {
      tc.decay_start_epoch =
          get_number<int>(t["decay_start_epoch"], "train.decay_start_epoch");
    }
    if (t.contains("epochs")) tc.epochs = get_number<int>(t["epochs"], "train.epochs");
    if (t.contains("batch_size")) {
      tc.batch_size = get_number<std::size_t>(t["batch_size"], "train.batch_size");
    }
    if (t.contains("seed")) tc.seed = get_number<std::uint64_t>(t["seed"], "train.seed");
    if (t.contains("seeds")) {
      if (!t["seeds"].is_array()) throw ConfigError("train.seeds", "expected an array");
      for (const auto& s : t["seeds"]) {
        cfg.seeds.push_back(get_number<std::uint64_t>(s, "train.seeds"));
      }
    }
    if (t.contains("beta1")) tc.beta1 = get_number<double>(t["beta1"], "train.beta1");
    if (t.contains("beta2")) tc.beta2 = get_number<double>(t["beta2"], "train.beta2");
    if (t.contains("eps")) tc.eps = get_number<double>(t["eps"], "train.eps");
    if (t.contains("record_timing")) {
      if (!t["record_timing"].is_boolean()) {
        throw ConfigError("train.record_timing", "expected true or false");
      }
      tc.record_timing = t["record_timing"].get<bool>();
    }
    tc.validate();
    if (cfg.seeds.size() == 1) {
      throw ConfigError("train.seeds", "give at least two seeds, or use train.seed");
    }
  }

  if (j.contains("data")) {
    const Json& d = j["data"];
    reject_unknown(d, "data", {"train", "val", "test"});
    if (d.contains("train")) cfg.train_manifest = get_path(d["train"], "data.train", base_dir);
    if (d.contains("val")) cfg.val_manifest = get_path(d["val"], "data.val", base_dir);
    if (d.contains("test")) cfg.test_manifest = get_path(d["test"], "data.test", base_dir);
  }
  if (j.contains("output_dir")) {
    cfg.output_dir = get_path(j["output_dir"], "output_dir", base_dir);
  }
  if (j.contains("cache_dir")) cfg.cache_dir = get_path(j["cache_dir"], "cache_dir", base_dir);
  if (j.contains("jobs")) {
    cfg.jobs = get_number<unsigned>(j["jobs"], "jobs");
    if (cfg.jobs < 1) throw ConfigError("jobs", "must be >= 1");
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return run_config_from_json(j, fs::absolute(path).parent_path());
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["frontend"] = to_json(cfg.frontend);
  j["model"] = to_json(cfg.model);
  Json t;
  t["lr0"] = cfg.train.lr0;
  t["decay"] = cfg.train.decay;
  t["decay_start_epoch"] = cfg.train.decay_start_epoch;
  t["epochs"] = cfg.train.epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["seed"] = cfg.train.seed;
  t["seeds"] = cfg.seeds;
  t["beta1"] = cfg.train.beta1;
  t["beta2"] = cfg.train.beta2;
  t["eps"] = cfg.train.eps;
  t["record_timing"] = cfg.train.record_timing;
  j["train"] = std::move(t);
  Json d = Json::object();
  if (cfg.train_manifest) d["train"] = cfg.train_manifest->string();
  if (cfg.val_manifest) d["val"] = cfg.val_manifest->string();
  if (cfg.test_manifest) d["test"] = cfg.test_manifest->string();
  j["data"] = std::move(d);
  if (cfg.output_dir) j["output_dir"] = cfg.output_dir->string();
  if (cfg.cache_dir) j["cache_dir"] = cfg.cache_dir->string();
  j["jobs"] = cfg.jobs;
  return j;
}

void validate_for_training(const RunConfig& cfg) {
  cfg.train.validate();
  if (cfg.model.input_shape[0] != cfg.frontend.target_frames ||
      cfg.model.input_shape[1] != kMelBins) {
    throw ConfigError("model.input_shape",
                      "must equal (frontend.target_frames, 128) for audio input");
  }
  auto check_manifest = [&](const std::optional<fs::path>& p, const char* field,
                            bool required) {
    if (!p) {
      if (required) throw ConfigError(field, "required");
      return;
    }
    if (!fs::is_regular_file(*p)) {
      throw ConfigError(field, "no such file: " + p->string());
    }
    Manifest m;
    try {
      m = read_manifest(*p);
    } catch (const Error& e) {
      throw ConfigError(field, e.what());
    }
    if (m.entries.empty()) throw ConfigError(field, "manifest has no rows");
    for (const auto& e : m.entries) {
      if (static_cast<std::size_t>(e.label) >= cfg.model.num_classes) {
        throw ConfigError(field, "label " + std::to_string(e.label) +
                                     " exceeds model.num_classes - 1");
      }
      if (!fs::is_regular_file(e.path)) {
        throw ConfigError(field, "missing clip " + e.path.string());
      }
    }
  };
  check_manifest(cfg.train_manifest, "data.train", true);
  check_manifest(cfg.val_manifest, "data.val", true);
  check_manifest(cfg.test_manifest, "data.test", false);

  if (!cfg.output_dir) throw ConfigError("output_dir", "required");
  fs::path probe = *cfg.output_dir;
  while (!probe.empty() && !fs::exists(probe)) probe = probe.parent_path();
  if (probe.empty()) probe = fs::current_path();
  if (!fs::is_directory(probe)) {
    throw ConfigError("output_dir", probe.string() + " exists and is not a directory");
  }
}

}  // namespace asmix
