/* Copyright 2026 The LW3D Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lw3d/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lw3d/rng.hpp"

namespace lw3d {

namespace fs = std::filesystem;

std::string to_string(Stream s) { return s == Stream::kDepth ? "depth" : "rgb"; }

Stream parse_stream(const std::string& s) {
  if (s == "rgb") return Stream::kRgb;
  if (s == "depth") return Stream::kDepth;
  throw std::invalid_argument("unknown stream '" + s + "' (expected rgb|depth)");
}

void AugmentConfig::validate() const {
  if (crop == 0 || crop > resize_h || crop > resize_w) {
    throw std::invalid_argument("crop " + std::to_string(crop) + " does not fit the resize target");
  }
  if (clip_length == 0) throw std::invalid_argument("clip length must be at least 1");
  if (!(flip_prob >= 0 && flip_prob <= 1)) throw std::invalid_argument("flip probability must be in [0, 1]");
}

std::uint64_t record_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
  return z ^ (z >> 33);
}

std::size_t clip_start(std::size_t frames, std::size_t length, std::uint64_t seed) {
  if (frames <= length) return 0;
  Rng rng(seed);
  return rng.below(frames - length + 1);
}

Tensor5D sample_clip(const Tensor5D& video, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw std::invalid_argument("clip length must be at least 1");
  const Shape5& s = video.shape();
  const std::size_t start = clip_start(s.t, length, seed);
  Shape5 os = s;
  os.t = length;
  Tensor5D out(os);
  const std::size_t frame = s.h * s.w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* src = video.channel(n, c);
      float* dst = out.channel(n, c);
      for (std::size_t t = 0; t < length; ++t) {
        std::copy_n(src + ((start + t) % s.t) * frame, frame, dst + t * frame);
      }
    }
  }
  return out;
}

Tensor5D resize_bilinear(const Tensor5D& clip, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw ShapeError("resize target must be positive");
  const Shape5& s = clip.shape();
  Shape5 os = s;
  os.h = h;
  os.w = w;
  Tensor5D out(os);
  struct Tap {
    std::size_t i0, i1;
    float f;
  };
  auto taps = [](std::size_t in, std::size_t outn) {
    std::vector<Tap> v(outn);
    const double scale = static_cast<double>(in) / static_cast<double>(outn);
    for (std::size_t o = 0; o < outn; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      v[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - static_cast<double>(i0))};
    }
    return v;
  };
  const auto ty = taps(s.h, h);
  const auto tx = taps(s.w, w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t t = 0; t < s.t; ++t) {
        const float* src = clip.channel(n, c) + t * s.h * s.w;
        float* dst = out.channel(n, c) + t * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const float* r0 = src + ty[y].i0 * s.w;
          const float* r1 = src + ty[y].i1 * s.w;
          const float fy = ty[y].f;
          for (std::size_t x = 0; x < w; ++x) {
            const Tap& a = tx[x];
            const float top = r0[a.i0] + (r0[a.i1] - r0[a.i0]) * a.f;
            const float bot = r1[a.i0] + (r1[a.i1] - r1[a.i0]) * a.f;
            dst[y * w + x] = top + (bot - top) * fy;
          }
        }
      }
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> crop_origin(std::size_t h, std::size_t w, std::size_t crop, CropSite site) {
  if (crop > h || crop > w) throw ShapeError("crop " + std::to_string(crop) + " larger than frame");
  switch (site) {
    case CropSite::kTopLeft: return {0, 0};
    case CropSite::kTopRight: return {0, w - crop};
    case CropSite::kBottomLeft: return {h - crop, 0};
    case CropSite::kBottomRight: return {h - crop, w - crop};
    case CropSite::kCenter: return {(h - crop) / 2, (w - crop) / 2};
  }
  return {0, 0};
}

Tensor5D crop_spatial(const Tensor5D& clip, std::size_t top, std::size_t left, std::size_t size) {
  const Shape5& s = clip.shape();
  if (size == 0 || top + size > s.h || left + size > s.w) {
    throw ShapeError("crop " + std::to_string(size) + " at (" + std::to_string(top) + "," + std::to_string(left) +
                     ") exceeds frame " + std::to_string(s.h) + "x" + std::to_string(s.w));
  }
  Shape5 os = s;
  os.h = size;
  os.w = size;
  Tensor5D out(os);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t t = 0; t < s.t; ++t) {
        for (std::size_t y = 0; y < size; ++y) {
          const float* src = clip.channel(n, c) + (t * s.h + top + y) * s.w + left;
          std::copy_n(src, size, out.channel(n, c) + (t * size + y) * size);
        }
      }
    }
  }
  return out;
}

Tensor5D flip_horizontal(const Tensor5D& clip) {
  const Shape5& s = clip.shape();
  Tensor5D out(s);
  const std::size_t rows = s.n * s.c * s.t * s.h;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = clip.raw() + r * s.w;
    std::reverse_copy(src, src + s.w, out.raw() + r * s.w);
  }
  return out;
}

Tensor5D augment(const Tensor5D& clip, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto site = static_cast<CropSite>(rng.below(5));
  const bool flip = rng.bernoulli(cfg.flip_prob);
  const Tensor5D resized = resize_bilinear(clip, cfg.resize_h, cfg.resize_w);
  const auto [top, left] = crop_origin(cfg.resize_h, cfg.resize_w, cfg.crop, site);
  Tensor5D out = crop_spatial(resized, top, left, cfg.crop);
  return flip ? flip_horizontal(out) : out;
}

std::vector<Sample> synth_samples(const SynthConfig& cfg) {
  if (cfg.classes < 2) throw std::invalid_argument("synthetic data needs at least 2 classes");
  if (cfg.clips_per_class == 0) throw std::invalid_argument("clips per class must be positive");
  Shape5 shape = cfg.shape;
  shape.n = 1;
  if (cfg.stream == Stream::kDepth) shape.c = 1;
  if (!shape.valid()) throw ShapeError("invalid clip shape " + shape.str());

  const double H = static_cast<double>(shape.h);
  const double W = static_cast<double>(shape.w);
  const double T = static_cast<double>(shape.t);
  const double sigma = std::max(1.0, H / 10.0);
  const double amplitude = H / (4.0 * static_cast<double>(cfg.classes));
  std::vector<Sample> out;
  const std::size_t total = cfg.classes * cfg.clips_per_class;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t k = i % cfg.classes;
    Rng rng(record_seed(cfg.seed, i));
    const double band = H * static_cast<double>(k + 1) / static_cast<double>(cfg.classes + 1);
    const double dir = k % 2 == 0 ? 1.0 : -1.0;
    const double jitter = rng.uniform(-1.0, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = static_cast<double>(k + 1);
    Sample s{Tensor5D(shape), k};
    for (std::size_t c = 0; c < shape.c; ++c) {
      const double tint = 1.0 - 0.15 * static_cast<double>(c);
      for (std::size_t t = 0; t < shape.t; ++t) {
        const double progress = shape.t > 1 ? static_cast<double>(t) / (T - 1.0) - 0.5 : 0.0;
        const double cy = band + jitter + dir * 2.0 * amplitude * progress;
        const double cx = (W - 1.0) / 2.0;
        const double level = 0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(t) / T + phase);
        for (std::size_t y = 0; y < shape.h; ++y) {
          for (std::size_t x = 0; x < shape.w; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double v = tint * level * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            s.clip.at(0, c, t, y, x) = static_cast<float>(v + cfg.noise * rng.normal());
          }
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

double mean_frame_centroid_accuracy(const std::vector<Sample>& samples, std::size_t classes) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const Shape5& s = samples.front().clip.shape();
  const std::size_t dim = s.c * s.h * s.w;
  auto features = [&](const Tensor5D& clip) {
    std::vector<double> f(dim, 0.0);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t t = 0; t < s.t; ++t)
        for (std::size_t p = 0; p < s.h * s.w; ++p) f[c * s.h * s.w + p] += clip.channel(0, c)[t * s.h * s.w + p];
    for (double& v : f) v /= static_cast<double>(s.t);
    return f;
  };
  std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(classes, 0);
  std::vector<std::vector<double>> feats;
  for (const Sample& smp : samples) {
    feats.push_back(features(smp.clip));
    for (std::size_t d = 0; d < dim; ++d) centroid[smp.label][d] += feats.back()[d];
    ++count[smp.label];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    for (double& v : centroid[k]) v /= static_cast<double>(std::max<std::size_t>(1, count[k]));
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < classes; ++k) {
      if (count[k] == 0) continue;
      double d = 0;
      for (std::size_t j = 0; j < dim; ++j) d += (feats[i][j] - centroid[k][j]) * (feats[i][j] - centroid[k][j]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += best == samples[i].label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

SynthDataset synth_dataset(const SynthConfig& cfg, const std::string& dir) {
  const std::vector<Sample> samples = synth_samples(cfg);
  fs::create_directories(dir);
  SynthDataset ds;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%05zu.lw3d", i);
    save_tensor((fs::path(dir) / name).string(), samples[i].clip);
    ds.records.push_back({name, samples[i].label, cfg.stream, "synth-" + std::to_string(i)});
  }
  write_manifest((fs::path(dir) / "manifest.tsv").string(), ds.records);
  ds.sanity_accuracy = mean_frame_centroid_accuracy(samples, cfg.classes);
  return ds;
}

void write_manifest(const std::string& path, const std::vector<ClipRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  for (const ClipRecord& r : records) {
    if (r.path.find_first_of("\t\n") != std::string::npos || r.source.find_first_of("\t\n") != std::string::npos) {
      throw FormatError("manifest fields may not contain tabs or newlines");
    }
    os << r.path << '\t' << r.label << '\t' << to_string(r.stream) << '\t' << r.source << '\n';
  }
}

std::vector<ClipRecord> read_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  std::vector<ClipRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, '\t');) f.push_back(tok);
    if (f.size() != 4) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    ClipRecord r;
    r.path = fs::path(f[0]).is_absolute() ? f[0] : (base / f[0]).string();
    try {
      std::size_t used = 0;
      r.label = std::stoul(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("label");
      r.stream = parse_stream(f[2]);
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": bad label or stream");
    }
    r.source = f[3];
    out.push_back(std::move(r));
  }
  return out;
}

Tensor5D load_clip(const ClipRecord& r) {
  Tensor5D t = load_tensor(r.path);
  if (t.shape().n != 1) throw FormatError("clip '" + r.path + "' must have batch dimension 1");
  if (r.stream == Stream::kDepth && t.shape().c == 1) {
    const Tensor5D parts[3] = {t, t, t};
    return concat_channels(parts);
  }
  return t;
}

}  // namespace lw3d
