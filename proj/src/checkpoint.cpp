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

#include "asmix/checkpoint.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "asmix/byte_io.hpp"
#include "asmix/config_json.hpp"

namespace asmix {
namespace {

using Kind = CheckpointErrorKind;

std::vector<std::uint8_t> encode_with_config(const Json& config,
                                             const std::vector<NamedTensor>& tensors,
                                             const Metadata& metadata,
                                             std::uint32_t version) {
  Json header;
  header["config"] = config;
  Json index = Json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    Json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    index.push_back(std::move(entry));
    offset += t.numel() * sizeof(float);
  }
  header["tensors"] = std::move(index);
  Json meta = Json::array();
  for (const auto& [k, v] : metadata) meta.push_back(Json::array({k, v}));
  header["metadata"] = std::move(meta);

  const std::string text = header.dump(1);
  std::vector<std::uint8_t> out;
  out.reserve(12 + text.size() + offset);
  bytes::put_tag(out, "ASMC");
  bytes::put_u32(out, version);
  bytes::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : tensors) bytes::put_f32(out, t.data());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Checkpoint

Checkpoint Checkpoint::from_model(const MixerModel& model, Metadata metadata) {
  Checkpoint c;
  c.config = model.config();
  for (const auto& [name, t] : model.parameters()) {
    c.tensors.emplace_back(name, t.clone());
  }
  c.metadata = std::move(metadata);
  return c;
}

MixerModel Checkpoint::to_model() const {
  std::vector<NamedTensor> copies;
  copies.reserve(tensors.size());
  for (const auto& [name, t] : tensors) copies.emplace_back(name, t.clone());
  return MixerModel::from_tensors(config, copies);
}

std::optional<std::string> Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Checkpoint::set_meta(const std::string& key, std::string value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata.emplace_back(key, std::move(value));
}

const Tensor* TensorContainer::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_container(const std::string& config_json,
                                           const std::vector<NamedTensor>& tensors,
                                           const Metadata& metadata) {
  return encode_with_config(Json::parse(config_json), tensors, metadata,
                            kCheckpointVersion);
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  return encode_with_config(to_json(ckpt.config), ckpt.tensors, ckpt.metadata,
                            ckpt.format_version);
}

TensorContainer decode_container(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || std::memcmp(data.data(), "ASMC", 4) != 0) {
    throw CheckpointError(Kind::kBadMagic, "magic", "expected \"ASMC\"");
  }
  if (data.size() < 12) {
    throw CheckpointError(Kind::kTruncated, "header_length",
                          "file ends inside the fixed header");
  }
  bytes::Reader r(data);
  r.skip(4, "magic");
  TensorContainer c;
  c.version = r.u32("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, "version",
                          "unsupported version " + std::to_string(c.version) +
                              ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::uint32_t header_len = r.u32("header length");
  if (r.remaining() < header_len) {
    throw CheckpointError(Kind::kTruncated, "header_length",
                          "declares " + std::to_string(header_len) +
                              " header bytes, only " +
                              std::to_string(r.remaining()) + " remain");
  }
  auto header_bytes = r.take(header_len, "header");
  Json header;
  try {
    header = Json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const Json::exception& e) {
    throw CheckpointError(Kind::kHeader, "header",
                          std::string("malformed JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("config") ||
      !header.contains("tensors") || !header["tensors"].is_array() ||
      !header.contains("metadata") || !header["metadata"].is_array()) {
    throw CheckpointError(Kind::kHeader, "header",
                          "expected object with config, tensors and metadata");
  }
  c.config_json = header["config"].dump();

  for (const auto& m : header["metadata"]) {
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string()) {
      throw CheckpointError(Kind::kHeader, "metadata",
                            "entries must be [key, value] string pairs");
    }
    c.metadata.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
  }

  const auto payload = data.subspan(r.pos());
  std::uint64_t expected_offset = 0;
  std::set<std::string> seen;
  for (const auto& e : header["tensors"]) {
    if (!e.is_object() || !e.contains("name") || !e["name"].is_string() ||
        !e.contains("shape") || !e["shape"].is_array() || !e.contains("offset") ||
        !e["offset"].is_number_unsigned()) {
      throw CheckpointError(Kind::kHeader, "tensors",
                            "index entries need name, shape and offset");
    }
    const std::string name = e["name"].get<std::string>();
    if (!seen.insert(name).second) {
      throw CheckpointError(Kind::kInconsistent, name, "duplicate tensor name");
    }
    Shape shape;
    for (const auto& d : e["shape"]) {
      if (!d.is_number_unsigned()) {
        throw CheckpointError(Kind::kHeader, name, "shape entries must be unsigned");
      }
      shape.push_back(d.get<std::size_t>());
    }
    const std::uint64_t offset = e["offset"].get<std::uint64_t>();
    if (offset != expected_offset) {
      throw CheckpointError(Kind::kInconsistent, name,
                            "offset " + std::to_string(offset) + ", expected " +
                                std::to_string(expected_offset));
    }
    const std::uint64_t nbytes = shape_numel(shape) * sizeof(float);
    if (offset + nbytes > payload.size()) {
      throw CheckpointError(Kind::kTruncated, "payload",
                            "tensor " + name + " extends past end of file");
    }
    std::vector<float> values(shape_numel(shape));
    std::memcpy(values.data(), payload.data() + offset, nbytes);
    c.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
    expected_offset = offset + nbytes;
  }
  if (expected_offset != payload.size()) {
    throw CheckpointError(Kind::kInconsistent, "payload",
                          std::to_string(payload.size() - expected_offset) +
                              " trailing bytes after the last tensor");
  }
  return c;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  TensorContainer c = decode_container(data);
  Checkpoint ckpt;
  ckpt.format_version = c.version;
  try {
    ckpt.config = mixer_config_from_json(Json::parse(c.config_json), "config");
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kHeader, e.field(), e.what());
  }

  const auto specs = parameter_specs(ckpt.config);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : c.tensors) by_name[name] = &t;
  std::string missing;
  for (const auto& s : specs) {
    if (!by_name.count(s.name)) missing += (missing.empty() ? "" : ", ") + s.name;
  }
  if (!missing.empty()) {
    throw CheckpointError(Kind::kInconsistent, "tensors",
                          "missing tensors: " + missing);
  }
  if (c.tensors.size() != specs.size()) {
    std::set<std::string> expected;
    for (const auto& s : specs) expected.insert(s.name);
    for (const auto& [name, t] : c.tensors) {
      if (!expected.count(name)) {
        throw CheckpointError(Kind::kInconsistent, name,
                              "tensor not part of the configured model");
      }
    }
  }
  for (const auto& s : specs) {
    const Tensor& t = *by_name[s.name];
    if (t.shape() != s.shape) {
      throw CheckpointError(Kind::kInconsistent, s.name,
                            "shape " + shape_str(t.shape()) + " but config implies " +
                                shape_str(s.shape));
    }
  }
  ckpt.tensors = std::move(c.tensors);
  ckpt.metadata = std::move(c.metadata);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  bytes::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(bytes::read_file(path));
}

// ---------------------------------------------------------------------------
// Channel conversion

std::optional<GrayMode> parse_gray_mode(std::string_view s) {
  if (s == "luma") return GrayMode::kLuma;
  if (s == "sum") return GrayMode::kSum;
  return std::nullopt;
}

std::string gray_mode_name(GrayMode mode) {
  return mode == GrayMode::kLuma ? "luma" : "sum";
}

std::array<double, 3> gray_coefficients(GrayMode mode) {
  return mode == GrayMode::kLuma ? kLumaCoefficients
                                 : std::array<double, 3>{1.0, 1.0, 1.0};
}

GrayProjection rgb_to_gray(const RgbProjectionWeights& src, GrayMode mode) {
  const Tensor& w = src.weight;
  std::size_t channels = 0, area = 0, dim = 0;
  if (w.rank() == 4) {
    channels = w.dim(0);
    area = w.dim(1) * w.dim(2);
    dim = w.dim(3);
    if (w.dim(1) != src.patch[0] || w.dim(2) != src.patch[1]) {
      throw InputError("rgb_to_gray: weight patch " + shape_str(w.shape()) +
                       " disagrees with declared patch size");
    }
  } else if (w.rank() == 2) {
    area = src.patch[0] * src.patch[1];
    if (area == 0 || w.dim(0) % area != 0) {
      throw InputError("rgb_to_gray: " + std::to_string(w.dim(0)) +
                       " rows is not a multiple of the patch area");
    }
    channels = w.dim(0) / area;
    dim = w.dim(1);
  } else {
    throw InputError("rgb_to_gray: weight must be rank 2 or 4, got " +
                     shape_str(w.shape()));
  }
  if (channels != 3) {
    throw InputError("rgb_to_gray: channel axis has length " +
                     std::to_string(channels) + ", expected 3");
  }
  if (!src.bias.defined() || src.bias.rank() != 1 || src.bias.dim(0) != dim) {
    throw InputError("rgb_to_gray: bias must have shape [" + std::to_string(dim) + "]");
  }

  const auto coef = gray_coefficients(mode);
  const std::size_t plane = area * dim;
  auto in = w.data();
  std::vector<float> out(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = coef[0] * in[i] + coef[1] * in[plane + i] +
                     coef[2] * in[2 * plane + i];
    out[i] = static_cast<float>(v);
  }
  check_finite(out, "rgb_to_gray");
  return {Tensor({area, dim}, std::move(out)), src.bias.clone()};
}

RgbProjectionWeights rgb_projection_from(const TensorContainer& c) {
  const Tensor* w = c.find("patch_embed.weight");
  const Tensor* b = c.find("patch_embed.bias");
  if (!w || !b) {
    throw InputError("source checkpoint lacks patch_embed.weight/patch_embed.bias");
  }
  RgbProjectionWeights src{*w, *b, {0, 0}};
  Json cfg = Json::parse(c.config_json);
  if (cfg.is_object() && cfg.contains("patch_size")) {
    const auto& p = cfg["patch_size"];
    if (p.is_array() && p.size() == 2) {
      src.patch = {p[0].get<std::size_t>(), p[1].get<std::size_t>()};
    } else if (p.is_number_unsigned()) {
      src.patch = {p.get<std::size_t>(), p.get<std::size_t>()};
    }
  } else if (w->rank() == 4) {
    src.patch = {w->dim(1), w->dim(2)};
  }
  if (src.patch[0] == 0 || src.patch[1] == 0) {
    throw InputError("source checkpoint does not declare its patch size");
  }
  return src;
}

ImportedModel import_foreign(std::span<const std::uint8_t> source_bytes,
                             const MixerConfig& target, GrayMode mode, Rng& rng) {
  const TensorContainer source = decode_container(source_bytes);
  const RgbProjectionWeights rgb = rgb_projection_from(source);
  if (rgb.patch != target.patch) {
    throw InputError("import: source patch " + shape_str({rgb.patch[0], rgb.patch[1]}) +
                     " does not match target patch " +
                     shape_str({target.patch[0], target.patch[1]}));
  }
  GrayProjection gray = rgb_to_gray(rgb, mode);
  if (gray.weight.dim(1) != target.dim) {
    throw InputError("import: source embedding width " +
                     std::to_string(gray.weight.dim(1)) + " does not match target dim " +
                     std::to_string(target.dim));
  }

  ImportedModel out{MixerModel::build(target, rng), {}};
  auto w = out.model.patch_weight.mutable_data();
  std::copy(gray.weight.data().begin(), gray.weight.data().end(), w.begin());
  auto b = out.model.patch_bias.mutable_data();
  std::copy(gray.bias.data().begin(), gray.bias.data().end(), b.begin());

  const auto coef = gray_coefficients(mode);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f", coef[0], coef[1], coef[2]);
  out.metadata = {{"import.mode", gray_mode_name(mode)},
                  {"import.coefficients", buf},
                  {"import.source_sha256", sha256_hex(source_bytes)}};
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

}  // namespace asmix
