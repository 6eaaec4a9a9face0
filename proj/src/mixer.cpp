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

#include "asmix/mixer.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "asmix/error.hpp"

namespace asmix {
namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void mlp_specs(std::vector<ParamSpec>& out, const std::string& prefix,
               std::size_t in, std::size_t hidden, const ActivationKind& act) {
  out.push_back({prefix + ".fc1.weight", {in, hidden}});
  out.push_back({prefix + ".fc1.bias", {hidden}});
  if (act.has_params()) {
    out.push_back({prefix + ".act.p1", {hidden}});
    out.push_back({prefix + ".act.p2", {hidden}});
    out.push_back({prefix + ".act.beta", {hidden}});
  }
  out.push_back({prefix + ".fc2.weight", {hidden, in}});
  out.push_back({prefix + ".fc2.bias", {in}});
}

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

void visit_mlp(MlpParams& p, const std::string& prefix, bool has_act,
               const ParamVisitor& fn) {
  fn(prefix + ".fc1.weight", p.fc1_weight);
  fn(prefix + ".fc1.bias", p.fc1_bias);
  if (has_act) {
    if (!p.act) p.act.emplace();
    fn(prefix + ".act.p1", p.act->p1);
    fn(prefix + ".act.p2", p.act->p2);
    fn(prefix + ".act.beta", p.act->beta);
  }
  fn(prefix + ".fc2.weight", p.fc2_weight);
  fn(prefix + ".fc2.bias", p.fc2_bias);
}

// Same order as parameter_specs.
void visit_params(MixerModel& m, const ParamVisitor& fn) {
  const auto& cfg = m.config();
  const bool has_act = cfg.activation.has_params();
  fn("patch_embed.weight", m.patch_weight);
  fn("patch_embed.bias", m.patch_bias);
  m.blocks.resize(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    auto& b = m.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    fn(p + ".norm1.gamma", b.norm1_gamma);
    fn(p + ".norm1.beta", b.norm1_beta);
    visit_mlp(b.token, p + ".token_mlp", has_act, fn);
    fn(p + ".norm2.gamma", b.norm2_gamma);
    fn(p + ".norm2.beta", b.norm2_beta);
    visit_mlp(b.channel, p + ".channel_mlp", has_act, fn);
  }
  fn("norm.gamma", m.norm_gamma);
  fn("norm.beta", m.norm_beta);
  fn("head.weight", m.head_weight);
  fn("head.bias", m.head_bias);
}

}  // namespace

std::size_t MixerConfig::grid_rows() const {
  if (input_shape[0] < patch[0] || stride[0] == 0) return 0;
  return (input_shape[0] - patch[0]) / stride[0] + 1;
}

std::size_t MixerConfig::grid_cols() const {
  if (input_shape[1] < patch[1] || stride[1] == 0) return 0;
  return (input_shape[1] - patch[1]) / stride[1] + 1;
}

std::size_t MixerConfig::num_tokens() const { return grid_rows() * grid_cols(); }

void MixerConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v < 1) throw ConfigError(field, "must be >= 1");
  };
  positive(patch[0], "patch_size");
  positive(patch[1], "patch_size");
  positive(stride[0], "stride");
  positive(stride[1], "stride");
  positive(dim, "dim");
  positive(depth, "depth");
  positive(token_hidden, "token_hidden");
  positive(channel_hidden, "channel_hidden");
  positive(num_classes, "num_classes");
  positive(input_shape[0], "input_shape");
  positive(input_shape[1], "input_shape");
  if (stride[0] > patch[0] || stride[1] > patch[1]) {
    throw ConfigError("stride", "must not exceed patch_size in either axis");
  }
  if (num_tokens() < 1) {
    throw ConfigError("patch_size", "larger than the input grid; no tokens");
  }
}

std::vector<ParamSpec> parameter_specs(const MixerConfig& cfg) {
  cfg.validate();
  const std::size_t s = cfg.num_tokens();
  std::vector<ParamSpec> out;
  out.push_back({"patch_embed.weight", {cfg.patch_area(), cfg.dim}});
  out.push_back({"patch_embed.bias", {cfg.dim}});
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    out.push_back({p + ".norm1.gamma", {cfg.dim}});
    out.push_back({p + ".norm1.beta", {cfg.dim}});
    mlp_specs(out, p + ".token_mlp", s, cfg.token_hidden, cfg.activation);
    out.push_back({p + ".norm2.gamma", {cfg.dim}});
    out.push_back({p + ".norm2.beta", {cfg.dim}});
    mlp_specs(out, p + ".channel_mlp", cfg.dim, cfg.channel_hidden,
              cfg.activation);
  }
  out.push_back({"norm.gamma", {cfg.dim}});
  out.push_back({"norm.beta", {cfg.dim}});
  out.push_back({"head.weight", {cfg.dim, cfg.num_classes}});
  out.push_back({"head.bias", {cfg.num_classes}});
  return out;
}

std::vector<ParamGroup> param_breakdown(const MixerConfig& cfg) {
  cfg.validate();
  const std::size_t s = cfg.num_tokens();
  const std::size_t d = cfg.dim;
  const std::size_t th = cfg.token_hidden;
  const std::size_t ch = cfg.channel_hidden;
  const std::size_t act = cfg.activation.has_params() ? 3 : 0;

  const std::size_t token = 2 * d + s * th + th + th * s + s + act * th;
  const std::size_t channel = 2 * d + d * ch + ch + ch * d + d + act * ch;
  return {
      {"patch_embed", cfg.patch_area() * d + d},
      {"token_mixing", cfg.depth * token},
      {"channel_mixing", cfg.depth * channel},
      {"final_norm", 2 * d},
      {"head", d * cfg.num_classes + cfg.num_classes},
  };
}

std::size_t param_count(const MixerConfig& cfg) {
  std::size_t total = 0;
  for (const auto& g : param_breakdown(cfg)) total += g.count;
  return total;
}

Tensor patchify(const Tensor& grid, const MixerConfig& cfg) {
  if (grid.rank() != 2 || grid.dim(0) != cfg.input_shape[0] ||
      grid.dim(1) != cfg.input_shape[1]) {
    throw InputError("patchify: input shape " + shape_str(grid.shape()) +
                     " does not match configured input " +
                     shape_str({cfg.input_shape[0], cfg.input_shape[1]}));
  }
  const std::size_t rows = cfg.grid_rows(), cols = cfg.grid_cols();
  const std::size_t ph = cfg.patch[0], pw = cfg.patch[1];
  const std::size_t width = grid.dim(1);
  auto g = grid.data();
  std::vector<float> out;
  out.reserve(rows * cols * ph * pw);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t t0 = r * cfg.stride[0], f0 = c * cfg.stride[1];
      for (std::size_t t = 0; t < ph; ++t) {
        const float* src = g.data() + (t0 + t) * width + f0;
        out.insert(out.end(), src, src + pw);
      }
    }
  }
  return Tensor({rows * cols, ph * pw}, std::move(out));
}

Tensor patchify(const MelSpectrogram& spec, const MixerConfig& cfg) {
  return patchify(spec.to_tensor(), cfg);
}

Tensor mlp(Tape& tape, const Tensor& x, const MlpParams& p,
           const ActivationKind& activation) {
  Tensor h = tape.linear(x, p.fc1_weight, p.fc1_bias);
  h = activate(tape, h, activation, p.act ? &*p.act : nullptr);
  return tape.linear(h, p.fc2_weight, p.fc2_bias);
}

Tensor mixer_block(Tape& tape, const Tensor& x, const BlockParams& block,
                   const ActivationKind& activation) {
  if (x.rank() != 2 || x.dim(0) != block.token.fc1_weight.dim(0) ||
      x.dim(1) != block.norm1_gamma.dim(0)) {
    throw DimensionError("mixer_block: input " + shape_str(x.shape()) +
                         " does not match block parameters");
  }
  Tensor h = tape.layer_norm(x, block.norm1_gamma, block.norm1_beta);
  h = tape.transpose2d(mlp(tape, tape.transpose2d(h), block.token, activation));
  Tensor u = tape.add(x, h);
  Tensor c = mlp(tape, tape.layer_norm(u, block.norm2_gamma, block.norm2_beta),
                 block.channel, activation);
  return tape.add(u, c);
}

MixerModel MixerModel::build(const MixerConfig& cfg, Rng& rng) {
  MixerModel m;
  m.cfg_ = cfg;
  const auto specs = parameter_specs(cfg);
  std::map<std::string, Tensor> pending;
  std::size_t idx = 0;
  visit_params(m, [&](const std::string& name, Tensor& t) {
    const auto& spec = specs.at(idx++);
    if (spec.name != name) {
      throw ContractError("parameter order mismatch at " + name);
    }
    if (ends_with(name, ".act.p1")) {
      const std::string prefix = name.substr(0, name.size() - 2);
      auto acon = aconc_init(spec.shape[0], cfg.activation.adapted, rng);
      t = acon.p1;
      pending[prefix + "p2"] = acon.p2;
      pending[prefix + "beta"] = acon.beta;
    } else if (auto it = pending.find(name); it != pending.end()) {
      t = it->second;
      pending.erase(it);
    } else if (ends_with(name, ".weight")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
      std::vector<float> w(shape_numel(spec.shape));
      for (auto& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
      t = Tensor(spec.shape, std::move(w), true);
    } else if (ends_with(name, ".gamma")) {
      t = Tensor::full(spec.shape, 1.0f, true);
    } else {
      t = Tensor::zeros(spec.shape, true);
    }
  });
  return m;
}

MixerModel MixerModel::from_tensors(const MixerConfig& cfg,
                                    const std::vector<NamedTensor>& tensors) {
  MixerModel m;
  m.cfg_ = cfg;
  std::map<std::string, Tensor> by_name(tensors.begin(), tensors.end());
  const auto specs = parameter_specs(cfg);
  std::size_t idx = 0;
  visit_params(m, [&](const std::string& name, Tensor& t) {
    const auto& spec = specs.at(idx++);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InputError("missing parameter " + name);
    if (it->second.shape() != spec.shape) {
      throw InputError("parameter " + name + " has shape " +
                       shape_str(it->second.shape()) + ", expected " +
                       shape_str(spec.shape));
    }
    t = it->second;
    t.set_requires_grad(true);
  });
  return m;
}

Tensor MixerModel::forward_patches(Tape& tape, const Tensor& patches) const {
  Tensor x = tape.linear(patches, patch_weight, patch_bias);
  for (const auto& b : blocks) x = mixer_block(tape, x, b, cfg_.activation);
  x = tape.layer_norm(x, norm_gamma, norm_beta);
  Tensor pooled = tape.reshape(tape.mean_rows(x), {1, cfg_.dim});
  Tensor logits = tape.linear(pooled, head_weight, head_bias);
  return tape.reshape(logits, {cfg_.num_classes});
}

Tensor MixerModel::forward(Tape& tape, const Tensor& grid) const {
  return forward_patches(tape, patchify(grid, cfg_));
}

Tensor MixerModel::forward(Tape& tape, const MelSpectrogram& spec) const {
  return forward(tape, spec.to_tensor());
}

std::vector<NamedTensor> MixerModel::parameters() const {
  std::vector<NamedTensor> out;
  // visit_params needs a mutable model but only copies handles here.
  auto& self = const_cast<MixerModel&>(*this);
  visit_params(self, [&](const std::string& name, Tensor& t) {
    out.emplace_back(name, t);
  });
  return out;
}

void MixerModel::zero_grad() const {
  for (auto& [name, t] : parameters()) t.zero_grad();
}

}  // namespace asmix
