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

#include "lw3d/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lw3d/rng.hpp"

namespace lw3d {

namespace {

constexpr std::size_t kTile = 256;
constexpr std::size_t kOutBlock = 4;

}  // namespace

std::string Extent3::str() const {
  std::ostringstream os;
  os << t << "x" << h << "x" << w;
  return os.str();
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || kernel == 0) throw ShapeError("kernel and stride must be >= 1");
  const std::size_t padded = in + 2 * pad;
  if (padded < kernel) {
    throw ShapeError("non-positive output extent: input " + std::to_string(in) + " + 2*" + std::to_string(pad) +
                     " < kernel " + std::to_string(kernel));
  }
  return (padded - kernel) / stride + 1;
}

void Conv3DSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || groups == 0) {
    throw ShapeError("conv channels and groups must be positive");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv channels " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                     " not divisible by groups " + std::to_string(groups));
  }
  if (kernel.volume() == 0 || stride.volume() == 0) throw ShapeError("conv kernel/stride must be positive");
}

std::size_t Conv3DSpec::param_count() const {
  return out_channels * (in_channels / groups) * kernel.volume();
}

Shape5 Conv3DSpec::weight_shape() const {
  return {out_channels, in_channels / groups, kernel.t, kernel.h, kernel.w};
}

Shape5 Conv3DSpec::output_shape(const Shape5& x) const {
  validate();
  if (x.c != in_channels) {
    throw ShapeError("conv expects " + std::to_string(in_channels) + " input channels, got " + std::to_string(x.c));
  }
  return {x.n, out_channels, conv_output_extent(x.t, kernel.t, stride.t, padding.t),
          conv_output_extent(x.h, kernel.h, stride.h, padding.h),
          conv_output_extent(x.w, kernel.w, stride.w, padding.w)};
}

Shape5 PoolSpec::output_shape(const Shape5& x) const {
  if (kernel.volume() == 0) throw ShapeError("pool kernel must be positive");
  return {x.n, x.c, conv_output_extent(x.t, kernel.t, stride.t, padding.t),
          conv_output_extent(x.h, kernel.h, stride.h, padding.h),
          conv_output_extent(x.w, kernel.w, stride.w, padding.w)};
}

BatchNormParams BatchNormParams::identity(std::size_t channels, float eps) {
  BatchNormParams p;
  p.gamma.assign(channels, 1.0f);
  p.beta.assign(channels, 0.0f);
  p.mean.assign(channels, 0.0f);
  p.var.assign(channels, 1.0f);
  p.eps = eps;
  return p;
}

void BatchNormParams::validate() const {
  const std::size_t c = gamma.size();
  if (beta.size() != c || mean.size() != c || var.size() != c) {
    throw ShapeError("batchnorm parameter vectors differ in length");
  }
  for (float v : var) {
    if (!(v >= 0.0f)) throw ShapeError("batchnorm variance must be >= 0");
  }
  if (!(eps >= 0.0f)) throw ShapeError("batchnorm epsilon must be >= 0");
}

Tensor5D conv3d_direct(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w, OpCounter* counter) {
  const Shape5 out = spec.output_shape(x.shape());
  if (w.shape() != spec.weight_shape()) {
    throw ShapeError("conv weight shape " + w.shape().str() + " != expected " + spec.weight_shape().str());
  }
  const Shape5& in = x.shape();
  const std::size_t cg = spec.in_channels / spec.groups;
  const std::size_t og = spec.out_channels / spec.groups;
  const Extent3 k = spec.kernel, s = spec.stride, p = spec.padding;
  Tensor5D y(out);

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t n = 0; n < out.n; ++n) {
    for (std::size_t o = 0; o < out.c; ++o) {
      const std::size_t g = o / og;
      for (std::size_t to = 0; to < out.t; ++to) {
        for (std::size_t ho = 0; ho < out.h; ++ho) {
          for (std::size_t wo = 0; wo < out.w; ++wo) {
            double acc = 0.0;
            for (std::size_t ci = 0; ci < cg; ++ci) {
              const std::size_t c = g * cg + ci;
              for (std::size_t kt = 0; kt < k.t; ++kt) {
                const long ti = static_cast<long>(to * s.t + kt) - static_cast<long>(p.t);
                for (std::size_t kh = 0; kh < k.h; ++kh) {
                  const long hi = static_cast<long>(ho * s.h + kh) - static_cast<long>(p.h);
                  for (std::size_t kw = 0; kw < k.w; ++kw) {
                    const long wi = static_cast<long>(wo * s.w + kw) - static_cast<long>(p.w);
                    const bool inside = ti >= 0 && ti < static_cast<long>(in.t) && hi >= 0 &&
                                        hi < static_cast<long>(in.h) && wi >= 0 && wi < static_cast<long>(in.w);
                    const double v = inside ? x.at(n, c, ti, hi, wi) : 0.0;
                    acc += static_cast<double>(w.at(o, ci, kt, kh, kw)) * v;
                  }
                }
              }
            }
            y.at(n, o, to, ho, wo) = static_cast<float>(acc);
          }
        }
      }
    }
  }
  if (counter != nullptr) {
    counter->macs += static_cast<std::uint64_t>(out.numel()) * cg * k.volume();
  }
  return y;
}

Tensor5D conv3d_lowered(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w) {
  const Shape5 out = spec.output_shape(x.shape());
  if (w.shape() != spec.weight_shape()) {
    throw ShapeError("conv weight shape " + w.shape().str() + " != expected " + spec.weight_shape().str());
  }
  const Shape5& in = x.shape();
  const std::size_t groups = spec.groups;
  const std::size_t cg = spec.in_channels / groups;
  const std::size_t og = spec.out_channels / groups;
  const Extent3 k = spec.kernel, s = spec.stride, p = spec.padding;
  const std::size_t kvol = k.volume();
  const std::size_t K = cg * kvol;
  const std::size_t P = out.sites();
  const std::size_t tiles = (P + kTile - 1) / kTile;
  Tensor5D y(out);

  const bool pointwise = kvol == 1 && s.volume() == 1 && p.volume() == 0;
  const long num_tasks = static_cast<long>(out.n * groups * tiles);

#pragma omp parallel
  {
    std::vector<float> col(K * kTile);
    std::vector<double> acc(kOutBlock * kTile);
    std::vector<long> toff(kTile), hoff(kTile), woff(kTile);

#pragma omp for schedule(static)
    for (long task = 0; task < num_tasks; ++task) {
      const std::size_t tile = static_cast<std::size_t>(task) % tiles;
      const std::size_t g = (static_cast<std::size_t>(task) / tiles) % groups;
      const std::size_t n = static_cast<std::size_t>(task) / (tiles * groups);
      const std::size_t p0 = tile * kTile;
      const std::size_t tl = std::min(kTile, P - p0);

      // Patch matrix: row k = (c, kt, kh, kw), column = output site.
      if (pointwise) {
        for (std::size_t ci = 0; ci < cg; ++ci) {
          const float* src = x.channel(n, g * cg + ci) + p0;
          std::copy_n(src, tl, col.data() + ci * kTile);
        }
      } else {
        for (std::size_t j = 0; j < tl; ++j) {
          const std::size_t site = p0 + j;
          const std::size_t wo = site % out.w;
          const std::size_t ho = (site / out.w) % out.h;
          const std::size_t to = site / (out.w * out.h);
          toff[j] = static_cast<long>(to * s.t) - static_cast<long>(p.t);
          hoff[j] = static_cast<long>(ho * s.h) - static_cast<long>(p.h);
          woff[j] = static_cast<long>(wo * s.w) - static_cast<long>(p.w);
        }
        for (std::size_t ci = 0; ci < cg; ++ci) {
          const float* src = x.channel(n, g * cg + ci);
          for (std::size_t kt = 0; kt < k.t; ++kt) {
            for (std::size_t kh = 0; kh < k.h; ++kh) {
              for (std::size_t kw = 0; kw < k.w; ++kw) {
                float* row = col.data() + (((ci * k.t + kt) * k.h + kh) * k.w + kw) * kTile;
                for (std::size_t j = 0; j < tl; ++j) {
                  const long ti = toff[j] + static_cast<long>(kt);
                  const long hi = hoff[j] + static_cast<long>(kh);
                  const long wi = woff[j] + static_cast<long>(kw);
                  const bool inside = ti >= 0 && ti < static_cast<long>(in.t) && hi >= 0 &&
                                      hi < static_cast<long>(in.h) && wi >= 0 && wi < static_cast<long>(in.w);
                  row[j] = inside ? src[(static_cast<std::size_t>(ti) * in.h + hi) * in.w + wi] : 0.0f;
                }
              }
            }
          }
        }
      }

      // Blocked multiply with double accumulators, k ascending per output.
      for (std::size_t ob = 0; ob < og; ob += kOutBlock) {
        const std::size_t nb = std::min(kOutBlock, og - ob);
        std::fill(acc.begin(), acc.begin() + nb * kTile, 0.0);
        for (std::size_t kk = 0; kk < K; ++kk) {
          const float* row = col.data() + kk * kTile;
          for (std::size_t b = 0; b < nb; ++b) {
            const double wv = w[(g * og + ob + b) * K + kk];
            double* a = acc.data() + b * kTile;
            for (std::size_t j = 0; j < tl; ++j) a[j] += wv * static_cast<double>(row[j]);
          }
        }
        for (std::size_t b = 0; b < nb; ++b) {
          float* dst = y.channel(n, g * og + ob + b) + p0;
          const double* a = acc.data() + b * kTile;
          for (std::size_t j = 0; j < tl; ++j) dst[j] = static_cast<float>(a[j]);
        }
      }
    }
  }
  return y;
}

std::size_t shuffle_destination(std::size_t c, std::size_t channels, std::size_t groups) {
  const std::size_t per = channels / groups;
  const std::size_t i = c / per;
  const std::size_t j = c % per;
  return j * groups + i;
}

Tensor5D channel_shuffle(const Tensor5D& x, std::size_t groups) {
  const Shape5& s = x.shape();
  if (groups == 0 || s.c % groups != 0) {
    throw ShapeError("channel_shuffle: " + std::to_string(s.c) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  }
  Tensor5D y(s);
  const std::size_t sites = s.sites();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      std::copy_n(x.channel(n, c), sites, y.channel(n, shuffle_destination(c, s.c, groups)));
    }
  }
  return y;
}

Tensor5D pool3d(const Tensor5D& x, const PoolSpec& spec, OpCounter* counter) {
  const Shape5 out = spec.output_shape(x.shape());
  const Shape5& in = x.shape();
  const Extent3 k = spec.kernel, s = spec.stride, p = spec.padding;
  const bool is_max = spec.kind == PoolKind::kMax;
  const double inv_volume = 1.0 / static_cast<double>(k.volume());
  Tensor5D y(out);

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t n = 0; n < out.n; ++n) {
    for (std::size_t c = 0; c < out.c; ++c) {
      const float* src = x.channel(n, c);
      float* dst = y.channel(n, c);
      for (std::size_t to = 0; to < out.t; ++to) {
        for (std::size_t ho = 0; ho < out.h; ++ho) {
          for (std::size_t wo = 0; wo < out.w; ++wo) {
            double best = -std::numeric_limits<double>::infinity();
            double sum = 0.0;
            for (std::size_t kt = 0; kt < k.t; ++kt) {
              const long ti = static_cast<long>(to * s.t + kt) - static_cast<long>(p.t);
              for (std::size_t kh = 0; kh < k.h; ++kh) {
                const long hi = static_cast<long>(ho * s.h + kh) - static_cast<long>(p.h);
                for (std::size_t kw = 0; kw < k.w; ++kw) {
                  const long wi = static_cast<long>(wo * s.w + kw) - static_cast<long>(p.w);
                  if (ti < 0 || ti >= static_cast<long>(in.t) || hi < 0 || hi >= static_cast<long>(in.h) || wi < 0 ||
                      wi >= static_cast<long>(in.w)) {
                    continue;  // -inf for max, 0 for average
                  }
                  const double v = src[(static_cast<std::size_t>(ti) * in.h + hi) * in.w + wi];
                  if (is_max) {
                    if (v > best) best = v;
                  } else {
                    sum += v;
                  }
                }
              }
            }
            dst[(to * out.h + ho) * out.w + wo] = static_cast<float>(is_max ? best : sum * inv_volume);
          }
        }
      }
    }
  }
  if (counter != nullptr) counter->pool_ops += static_cast<std::uint64_t>(out.numel()) * k.volume();
  return y;
}

Tensor5D batchnorm_infer(const Tensor5D& x, const BatchNormParams& p) {
  p.validate();
  const Shape5& s = x.shape();
  if (p.channels() != s.c) {
    throw ShapeError("batchnorm has " + std::to_string(p.channels()) + " channels, input has " +
                     std::to_string(s.c));
  }
  Tensor5D y(s);
  const std::size_t sites = s.sites();
  for (std::size_t c = 0; c < s.c; ++c) {
    const double scale = p.gamma[c] / std::sqrt(static_cast<double>(p.var[c]) + p.eps);
    const double shift = p.beta[c] - scale * p.mean[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* src = x.channel(n, c);
      float* dst = y.channel(n, c);
      for (std::size_t i = 0; i < sites; ++i) dst[i] = static_cast<float>(scale * src[i] + shift);
    }
  }
  return y;
}

Tensor5D softmax_channels(const Tensor5D& x) {
  const Shape5& s = x.shape();
  Tensor5D y(s);
  const std::size_t sites = s.sites();
  std::vector<double> e(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < sites; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.c; ++c) m = std::max(m, static_cast<double>(x.channel(n, c)[i]));
      double z = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        e[c] = std::exp(static_cast<double>(x.channel(n, c)[i]) - m);
        z += e[c];
      }
      for (std::size_t c = 0; c < s.c; ++c) y.channel(n, c)[i] = static_cast<float>(e[c] / z);
    }
  }
  return y;
}

Tensor5D init_conv_weights(const Conv3DSpec& spec, std::uint64_t seed, InitScheme scheme) {
  spec.validate();
  const double kvol = static_cast<double>(spec.kernel.volume());
  const double fan_in = static_cast<double>(spec.in_channels / spec.groups) * kvol;
  const double fan_out = static_cast<double>(spec.out_channels / spec.groups) * kvol;
  const double bound = std::sqrt(6.0 / (scheme == InitScheme::kHe ? fan_in : fan_in + fan_out));
  Rng rng(seed);
  Tensor5D w(spec.weight_shape());
  for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return w;
}

}  // namespace lw3d
