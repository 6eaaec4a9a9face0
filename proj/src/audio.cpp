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

#include "asmix/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include "asmix/byte_io.hpp"
#include "asmix/error.hpp"

namespace asmix {

namespace fs = std::filesystem;

std::size_t FrontendConfig::frame_length() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_ms / 1000.0));
}

std::size_t FrontendConfig::hop_length() const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

Tensor MelSpectrogram::to_tensor() const {
  return Tensor({frames, kMelBins}, cells);
}

// ---------------------------------------------------------------------------
// WAV

AudioClip load_wav(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (r.tag("RIFF header") != "RIFF") {
    throw FormatError("riff", "missing RIFF signature");
  }
  r.u32("RIFF size");
  if (r.tag("WAVE tag") != "WAVE") {
    throw FormatError("wave", "RIFF form type is not WAVE");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  while (true) {
    const std::string id = r.tag("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("fmt chunk shorter than 16 bytes");
      bytes::Reader fmt(r.take(size, "fmt chunk"));
      const std::uint16_t format = fmt.u16("audio_format");
      channels = fmt.u16("channels");
      rate = fmt.u32("sample_rate");
      fmt.u32("byte_rate");
      fmt.u16("block_align");
      const std::uint16_t bits = fmt.u16("bits_per_sample");
      if (format != 1) {
        throw FormatError("audio_format",
                          "only PCM (1) is supported, got " +
                              std::to_string(format));
      }
      if (bits != 16) {
        throw FormatError("bits_per_sample",
                          "only 16-bit PCM is supported, got " +
                              std::to_string(bits));
      }
      if (channels != 1 && channels != 2) {
        throw FormatError("channels", "expected 1 or 2, got " +
                                          std::to_string(channels));
      }
      if (rate == 0) throw FormatError("sample_rate", "must be positive");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("data chunk precedes fmt chunk");
      auto payload = r.take(size, "data chunk");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t n = payload.size() / frame_bytes;
      if (n == 0) throw InputError("WAV file holds no samples");
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(n);
      bytes::Reader pr(payload);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(pr.u16("sample")) / 32768.0;
        }
        clip.samples[i] = static_cast<float>(acc / channels);
      }
      return clip;
    } else {
      r.skip(size + (size & 1u), "chunk body");
    }
  }
}

AudioClip read_wav_file(const fs::path& path) {
  auto data = bytes::read_file(path);
  try {
    return load_wav(data);
  } catch (const FormatError& e) {
    throw FormatError(e.field(), path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  bytes::put_tag(out, "RIFF");
  bytes::put_u32(out, 36 + data_bytes);
  bytes::put_tag(out, "WAVE");
  bytes::put_tag(out, "fmt ");
  bytes::put_u32(out, 16);
  bytes::put_u16(out, 1);
  bytes::put_u16(out, 1);
  bytes::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  bytes::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  bytes::put_u16(out, 2);
  bytes::put_u16(out, 16);
  bytes::put_tag(out, "data");
  bytes::put_u32(out, data_bytes);
  for (float s : clip.samples) {
    const double q = std::nearbyint(static_cast<double>(s) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    bytes::put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav_file(const fs::path& path, const AudioClip& clip) {
  bytes::write_file(path, encode_wav(clip));
}

AudioClip resample_linear(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw InputError("resample: target rate must be > 0");
  if (clip.sample_rate <= 0) throw InputError("resample: bad source rate");
  if (target_rate == clip.sample_rate || clip.samples.empty()) {
    return {clip.samples, target_rate};
  }
  const std::size_t n = clip.samples.size();
  const auto m = static_cast<std::size_t>(std::max<long long>(
      1, std::llround(static_cast<double>(n) * target_rate / clip.sample_rate)));
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= n) {
      out.samples[i] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(k);
    out.samples[i] = static_cast<float>(clip.samples[k] * (1.0 - frac) +
                                        clip.samples[k + 1] * frac);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral front end

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(const FrontendConfig& cfg) {
  MelFilterbank fb;
  fb.n_bins = cfg.n_fft / 2 + 1;
  fb.weights.assign(kMelBins * fb.n_bins, 0.0f);
  fb.first.assign(kMelBins, 0);
  fb.last.assign(kMelBins, 0);
  fb.center_hz.resize(kMelBins);

  const double mel_hi = hz_to_mel(cfg.sample_rate / 2.0);
  std::vector<double> edges(kMelBins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) /
                         static_cast<double>(kMelBins + 1));
  }
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (std::size_t m = 0; m < kMelBins; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz[m] = mid;
    bool seen = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = k * bin_hz;
      const double w =
          std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      if (w <= 0.0) continue;
      fb.weights[m * fb.n_bins + k] = static_cast<float>(w);
      if (!seen) fb.first[m] = k;
      seen = true;
      fb.last[m] = k + 1;
    }
  }
  return fb;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly rather than by recurrence to avoid drift.
        const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace

std::vector<double> power_spectrum_naive(std::span<const double> frame,
                                         std::size_t n_fft) {
  const std::size_t bins = n_fft / 2 + 1;
  const std::size_t len = std::min(frame.size(), n_fft);
  std::vector<double> out(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      // Reduce k*t mod n_fft first to keep the angle small and exact.
      const double ang = -2.0 * std::numbers::pi *
                         static_cast<double>((k * t) % n_fft) /
                         static_cast<double>(n_fft);
      re += frame[t] * std::cos(ang);
      im += frame[t] * std::sin(ang);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

std::vector<double> power_spectrum(std::span<const double> frame,
                                   std::size_t n_fft) {
  if (!is_pow2(n_fft)) return power_spectrum_naive(frame, n_fft);
  std::vector<std::complex<double>> buf(n_fft);
  const std::size_t len = std::min(frame.size(), n_fft);
  for (std::size_t i = 0; i < len; ++i) buf[i] = frame[i];
  fft_inplace(buf);
  std::vector<double> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(buf[k]);
  return out;
}

std::size_t frame_count(std::size_t n_samples, std::size_t frame_len,
                        std::size_t hop) {
  if (n_samples < frame_len) return 0;
  return (n_samples - frame_len) / hop + 1;
}

MelSpectrogram log_mel(const AudioClip& clip, const FrontendConfig& cfg) {
  if (clip.sample_rate != cfg.sample_rate) {
    throw InputError("log_mel: clip is at " + std::to_string(clip.sample_rate) +
                     " Hz, front end expects " +
                     std::to_string(cfg.sample_rate) + " Hz");
  }
  const std::size_t frame_len = cfg.frame_length();
  const std::size_t hop = cfg.hop_length();
  if (frame_len == 0 || hop == 0 || frame_len > cfg.n_fft) {
    throw InputError("log_mel: frame length must be in [1, n_fft] and hop >= 1");
  }
  const std::size_t frames = frame_count(clip.samples.size(), frame_len, hop);
  if (frames == 0) {
    throw InputError("log_mel: clip has " +
                     std::to_string(clip.samples.size()) +
                     " samples, shorter than one frame (" +
                     std::to_string(frame_len) + ")");
  }

  const auto window = hann_window(frame_len);
  const auto fb = mel_filterbank(cfg);
  const double log_floor = std::log(cfg.log_floor);

  MelSpectrogram spec;
  spec.frames = frames;
  spec.frame_hop = cfg.hop_ms / 1000.0;
  spec.cells.resize(frames * kMelBins);
  std::vector<double> buf(frame_len);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + t * hop;
    for (std::size_t i = 0; i < frame_len; ++i) buf[i] = src[i] * window[i];
    const auto power = power_spectrum(buf, cfg.n_fft);
    for (std::size_t m = 0; m < kMelBins; ++m) {
      double e = 0.0;
      for (std::size_t k = fb.first[m]; k < fb.last[m]; ++k) {
        e += fb.weights[m * fb.n_bins + k] * power[k];
      }
      spec.cells[t * kMelBins + m] = static_cast<float>(
          e > cfg.log_floor ? std::log(e) : log_floor);
    }
  }
  return spec;
}

MelSpectrogram pad_or_truncate(const MelSpectrogram& spec,
                               std::size_t target_frames, double log_floor) {
  if (target_frames == 0) throw InputError("pad_or_truncate: target is 0");
  MelSpectrogram out = spec;
  out.frames = target_frames;
  out.cells.resize(target_frames * kMelBins,
                   static_cast<float>(std::log(log_floor)));
  return out;
}

MelSpectrogram normalize(const MelSpectrogram& spec, double mean, double std) {
  if (!(std > 0.0)) {
    throw InputError("normalize: std must be > 0, got " + std::to_string(std));
  }
  MelSpectrogram out = spec;
  const double scale = 1.0 / (2.0 * std);
  for (auto& c : out.cells) c = static_cast<float>((c - mean) * scale);
  out.normalized = true;
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

int Manifest::num_classes() const {
  int c = 0;
  for (const auto& e : entries) c = std::max(c, e.label + 1);
  return c;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.source = fs::absolute(path);
  const fs::path base = m.source.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "path,label") {
        throw InputError(path.string() + ":" + std::to_string(lineno) +
                         ": expected header 'path,label'");
      }
      header = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected '<path>,<label>'");
    }
    ManifestEntry e;
    const std::string label = line.substr(comma + 1);
    std::size_t used = 0;
    try {
      e.label = std::stoi(label, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != label.size() || label.empty() || e.label < 0) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": label '" + label +
                       "' is not a non-negative integer");
    }
    fs::path p = line.substr(0, comma);
    e.path = p.is_absolute() ? p : (base / p).lexically_normal();
    m.entries.push_back(std::move(e));
  }
  if (!header) throw InputError(path.string() + ": empty manifest file");
  return m;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ostringstream os;
  os << "path,label\n";
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_absolute()) {
      auto rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    os << p.generic_string() << ',' << e.label << '\n';
  }
  const std::string s = os.str();
  bytes::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()),
                                    s.size()));
}

namespace {

struct StatsAccumulator {
  bool started = false;
  double shift = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t count = 0;

  void add(std::span<const float> cells) {
    for (float c : cells) {
      if (!started) {
        shift = c;
        started = true;
      }
      const double d = c - shift;
      sum += d;
      sumsq += d * d;
      ++count;
    }
  }

  FeatureStats finish() const {
    if (count == 0) throw InputError("dataset_stats: no cells");
    FeatureStats s;
    s.count = count;
    const double n = static_cast<double>(count);
    const double mean_d = sum / n;
    s.mean = shift + mean_d;
    s.std = std::sqrt(std::max(0.0, sumsq / n - mean_d * mean_d));
    s.degenerate = !(s.std > 0.0);
    if (s.degenerate) {
      std::cerr << "warning: dataset_stats: degenerate standard deviation "
                   "(all cells equal)\n";
    }
    return s;
  }
};

}  // namespace

FeatureStats dataset_stats(std::span<const MelSpectrogram> specs) {
  if (specs.empty()) throw InputError("dataset_stats: empty dataset");
  StatsAccumulator acc;
  for (const auto& s : specs) acc.add(s.cells);
  return acc.finish();
}

FeatureStats dataset_stats(const Manifest& manifest, const FrontendConfig& cfg) {
  if (manifest.entries.empty()) throw InputError("dataset_stats: empty manifest");
  StatsAccumulator acc;
  for (const auto& e : manifest.entries) acc.add(load_features(e.path, cfg).cells);
  return acc.finish();
}

MelSpectrogram load_features(const fs::path& wav, const FrontendConfig& cfg) {
  AudioClip clip = read_wav_file(wav);
  if (clip.sample_rate != cfg.sample_rate) {
    clip = resample_linear(clip, cfg.sample_rate);
  }
  return pad_or_truncate(log_mel(clip, cfg), cfg.target_frames, cfg.log_floor);
}

void write_feature_cache(const fs::path& path, const MelSpectrogram& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + spec.cells.size() * 4);
  bytes::put_tag(out, "ASMF");
  bytes::put_u32(out, static_cast<std::uint32_t>(spec.frames));
  bytes::put_u32(out, static_cast<std::uint32_t>(kMelBins));
  bytes::put_f32(out, spec.cells);
  bytes::write_file(path, out);
}

MelSpectrogram read_feature_cache(const fs::path& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader r(data);
  if (r.tag("magic") != "ASMF") {
    throw ParseError(path.string() + ": bad magic, expected ASMF");
  }
  MelSpectrogram spec;
  spec.frames = r.u32("frame count");
  const std::uint32_t bins = r.u32("bin count");
  if (bins != kMelBins) {
    throw ParseError(path.string() + ": expected 128 mel bins, got " +
                     std::to_string(bins));
  }
  spec.cells.resize(spec.frames * kMelBins);
  r.f32(spec.cells, "cells");
  return spec;
}

namespace {

std::string frontend_fingerprint(const FrontendConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << cfg.sample_rate << '|' << cfg.frame_ms << '|' << cfg.hop_ms << '|'
     << cfg.n_fft << '|' << cfg.log_floor;
  // FNV-1a, stable across platforms.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

}  // namespace

fs::path feature_cache_path(const fs::path& cache_dir, const Manifest& manifest,
                            const ManifestEntry& entry,
                            const FrontendConfig& cfg) {
  std::string name =
      entry.path.lexically_relative(manifest.source.parent_path()).generic_string();
  if (name.empty()) name = entry.path.generic_string();
  for (auto& ch : name) {
    if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
  }
  return cache_dir / frontend_fingerprint(cfg) / (name + ".asmf");
}

std::vector<MelSpectrogram> extract_features(
    const Manifest& manifest, const FrontendConfig& cfg, unsigned jobs,
    const std::optional<fs::path>& cache_dir) {
  const std::size_t n = manifest.entries.size();
  std::vector<MelSpectrogram> out(n);
  if (cache_dir) {
    fs::create_directories(*cache_dir / frontend_fingerprint(cfg));
  }

  auto one = [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    if (!cache_dir) {
      out[i] = load_features(e.path, cfg);
      return;
    }
    const fs::path cached = feature_cache_path(*cache_dir, manifest, e, cfg);
    MelSpectrogram raw;
    if (fs::exists(cached)) {
      raw = read_feature_cache(cached);
    } else {
      AudioClip clip = read_wav_file(e.path);
      if (clip.sample_rate != cfg.sample_rate) {
        clip = resample_linear(clip, cfg.sample_rate);
      }
      raw = log_mel(clip, cfg);
      write_feature_cache(cached, raw);
    }
    raw.frame_hop = cfg.hop_ms / 1000.0;
    out[i] = pad_or_truncate(raw, cfg.target_frames, cfg.log_floor);
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) one(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += jobs) one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace asmix
