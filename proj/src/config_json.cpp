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

#include "asmix/config_json.hpp"

#include <set>

#include "asmix/error.hpp"

namespace asmix {
namespace {

void reject_unknown(const Json& j, const std::string& where,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + "." + key, "unknown key");
  }
}

std::size_t get_count(const Json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(field, "expected a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

double get_real(const Json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number, got " + v.dump());
  return v.get<double>();
}

std::array<std::size_t, 2> get_pair(const Json& v, const std::string& field) {
  if (v.is_number_integer()) {
    auto n = get_count(v, field);
    return {n, n};
  }
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(field, "expected an integer or a two-element array");
  }
  return {get_count(v[0], field), get_count(v[1], field)};
}

}  // namespace

Json to_json(const MixerConfig& cfg) {
  Json j;
  j["patch_size"] = {cfg.patch[0], cfg.patch[1]};
  j["stride"] = {cfg.stride[0], cfg.stride[1]};
  j["dim"] = cfg.dim;
  j["depth"] = cfg.depth;
  j["token_hidden"] = cfg.token_hidden;
  j["channel_hidden"] = cfg.channel_hidden;
  j["activation"] = activation_name(cfg.activation);
  j["num_classes"] = cfg.num_classes;
  j["input_shape"] = {cfg.input_shape[0], cfg.input_shape[1]};
  return j;
}

MixerConfig mixer_config_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"patch_size", "stride", "dim", "depth", "token_hidden",
                  "channel_hidden", "activation", "num_classes", "input_shape"});
  MixerConfig cfg;
  auto field = [&](const char* k) { return where + "." + k; };
  if (j.contains("patch_size")) cfg.patch = get_pair(j["patch_size"], field("patch_size"));
  // Stride defaults to the patch size (non-overlapping).
  cfg.stride = cfg.patch;
  if (j.contains("stride")) cfg.stride = get_pair(j["stride"], field("stride"));
  if (j.contains("dim")) cfg.dim = get_count(j["dim"], field("dim"));
  if (j.contains("depth")) cfg.depth = get_count(j["depth"], field("depth"));
  if (j.contains("token_hidden")) {
    cfg.token_hidden = get_count(j["token_hidden"], field("token_hidden"));
  }
  if (j.contains("channel_hidden")) {
    cfg.channel_hidden = get_count(j["channel_hidden"], field("channel_hidden"));
  }
  if (j.contains("activation")) {
    const auto& a = j["activation"];
    std::optional<ActivationKind> kind;
    if (a.is_string()) kind = parse_activation(a.get<std::string>());
    if (!kind) {
      throw ConfigError(field("activation"),
                        "got " + a.dump() + "; allowed values: " +
                            std::string(kActivationChoices));
    }
    cfg.activation = *kind;
  }
  if (j.contains("num_classes")) {
    cfg.num_classes = get_count(j["num_classes"], field("num_classes"));
  }
  if (j.contains("input_shape")) {
    cfg.input_shape = get_pair(j["input_shape"], field("input_shape"));
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + "." + e.field(), e.what());
  }
  return cfg;
}

Json to_json(const FrontendConfig& cfg) {
  Json j;
  j["sample_rate"] = cfg.sample_rate;
  j["frame_ms"] = cfg.frame_ms;
  j["hop_ms"] = cfg.hop_ms;
  j["n_fft"] = cfg.n_fft;
  j["log_floor"] = cfg.log_floor;
  j["target_frames"] = cfg.target_frames;
  return j;
}

FrontendConfig frontend_config_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"sample_rate", "frame_ms", "hop_ms", "n_fft", "log_floor",
                  "target_frames"});
  FrontendConfig cfg;
  auto field = [&](const char* k) { return where + "." + k; };
  if (j.contains("sample_rate")) {
    cfg.sample_rate = static_cast<int>(get_count(j["sample_rate"], field("sample_rate")));
  }
  if (j.contains("frame_ms")) cfg.frame_ms = get_real(j["frame_ms"], field("frame_ms"));
  if (j.contains("hop_ms")) cfg.hop_ms = get_real(j["hop_ms"], field("hop_ms"));
  if (j.contains("n_fft")) cfg.n_fft = get_count(j["n_fft"], field("n_fft"));
  if (j.contains("log_floor")) cfg.log_floor = get_real(j["log_floor"], field("log_floor"));
  if (j.contains("target_frames")) {
    cfg.target_frames = get_count(j["target_frames"], field("target_frames"));
  }
  if (cfg.sample_rate <= 0) throw ConfigError(field("sample_rate"), "must be > 0");
  if (!(cfg.hop_ms > 0.0) || cfg.hop_length() == 0) {
    throw ConfigError(field("hop_ms"), "must give a hop of at least one sample");
  }
  if (!(cfg.frame_ms > 0.0) || cfg.frame_length() == 0) {
    throw ConfigError(field("frame_ms"), "must give at least one sample per frame");
  }
  if (cfg.n_fft < cfg.frame_length()) {
    throw ConfigError(field("n_fft"), "must be >= the frame length in samples");
  }
  if (!(cfg.log_floor > 0.0)) throw ConfigError(field("log_floor"), "must be > 0");
  if (cfg.target_frames < 1) throw ConfigError(field("target_frames"), "must be >= 1");
  return cfg;
}

}  // namespace asmix
