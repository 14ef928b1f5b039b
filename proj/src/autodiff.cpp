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

#include "lw3d/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lw3d/rng.hpp"

namespace lw3d {

namespace {

void require_shape(const Tensor5D& t, const Shape5& s, const char* what) {
  if (t.shape() != s) {
    throw ShapeError(std::string(what) + ": expected " + s.str() + ", got " + t.shape().str());
  }
}

// Input coordinate along one axis for output index o and tap k, or -1 when
// the tap falls into padding.
inline long tap(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent) {
  const long i = static_cast<long>(o * stride + k) - static_cast<long>(pad);
  return (i < 0 || i >= static_cast<long>(extent)) ? -1 : i;
}

}  // namespace

Parameter::Parameter(Tensor5D v) : value(std::move(v)), grad(value.shape()), momentum(value.shape()) {}

void Parameter::zero_grad() { grad.fill(0.0f); }

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(lr_decay_factor > 1)) throw std::invalid_argument("decay factor must exceed 1");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(grad_clip_norm >= 0)) throw std::invalid_argument("gradient clip norm must be non-negative");
}

void sgd_step(std::span<Parameter* const> params, const TrainConfig& cfg, float lr) {
  float scale = 1.0f;
  if (cfg.grad_clip_norm > 0) {
    double sq = 0;
    for (const Parameter* p : params) {
      for (float g : p->grad.data()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip_norm) scale = static_cast<float>(cfg.grad_clip_norm / norm);
  }
  for (Parameter* p : params) {
    float* w = p->value.raw();
    float* g = p->grad.raw();
    float* v = p->momentum.raw();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      v[i] = cfg.momentum * v[i] + scale * g[i];
      w[i] -= lr * v[i];
      g[i] = 0.0f;
    }
  }
}

PlateauScheduler::PlateauScheduler(const TrainConfig& cfg)
    : lr_(cfg.learning_rate),
      factor_(cfg.lr_decay_factor),
      patience_(cfg.plateau_patience),
      threshold_(cfg.plateau_threshold),
      best_(std::numeric_limits<double>::infinity()) {}

float PlateauScheduler::step(double loss) {
  if (loss < best_ - threshold_) {
    best_ = loss;
    stale_ = 0;
    return lr_;
  }
  if (++stale_ >= patience_) {
    lr_ /= factor_;
    ++decays_;
    stale_ = 0;
    best_ = std::min(best_, loss);
  }
  return lr_;
}

ConvGrads conv3d_backward(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w, const Tensor5D& dy) {
  const Shape5 ys = spec.output_shape(x.shape());
  require_shape(w, spec.weight_shape(), "conv3d_backward weights");
  require_shape(dy, ys, "conv3d_backward upstream");
  const Shape5& xs = x.shape();
  const std::size_t G = spec.groups;
  const std::size_t cin_g = spec.in_channels / G;
  const std::size_t cout_g = spec.out_channels / G;
  const Extent3 k = spec.kernel;
  const std::size_t kvol = k.volume();
  const std::size_t K = cin_g * kvol;
  const std::size_t P = ys.sites();

  ConvGrads out{Tensor5D(xs), Tensor5D(w.shape())};
  std::vector<double> dw(w.size(), 0.0);
  std::vector<float> cols(K * P);
  std::vector<double> dcols(K * P);

  // Flat input offset within one channel for every (tap, output site), -1 in padding.
  std::vector<long> offset(kvol * P);
  for (std::size_t kt = 0, kk = 0; kt < k.t; ++kt) {
    for (std::size_t kh = 0; kh < k.h; ++kh) {
      for (std::size_t kw = 0; kw < k.w; ++kw, ++kk) {
        std::size_t p = 0;
        for (std::size_t ot = 0; ot < ys.t; ++ot) {
          const long it = tap(ot, kt, spec.stride.t, spec.padding.t, xs.t);
          for (std::size_t oh = 0; oh < ys.h; ++oh) {
            const long ih = tap(oh, kh, spec.stride.h, spec.padding.h, xs.h);
            for (std::size_t ow = 0; ow < ys.w; ++ow, ++p) {
              const long iw = tap(ow, kw, spec.stride.w, spec.padding.w, xs.w);
              offset[kk * P + p] =
                  (it < 0 || ih < 0 || iw < 0) ? -1 : (it * static_cast<long>(xs.h) + ih) * static_cast<long>(xs.w) + iw;
            }
          }
        }
      }
    }
  }

  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t ci = 0; ci < cin_g; ++ci) {
        const float* src = x.channel(n, g * cin_g + ci);
        for (std::size_t kk = 0; kk < kvol; ++kk) {
          float* row = &cols[(ci * kvol + kk) * P];
          const long* off = &offset[kk * P];
          for (std::size_t p = 0; p < P; ++p) row[p] = off[p] < 0 ? 0.0f : src[off[p]];
        }
      }
      std::fill(dcols.begin(), dcols.end(), 0.0);
      for (std::size_t co = 0; co < cout_g; ++co) {
        const std::size_t oc = g * cout_g + co;
        const float* d = dy.channel(n, oc);
        const float* wr = w.raw() + oc * K;
        double* dwr = dw.data() + oc * K;
        for (std::size_t kr = 0; kr < K; ++kr) {
          const float* row = &cols[kr * P];
          double acc = 0;
          for (std::size_t p = 0; p < P; ++p) acc += static_cast<double>(d[p]) * row[p];
          dwr[kr] += acc;
          const double wv = wr[kr];
          double* drow = &dcols[kr * P];
          for (std::size_t p = 0; p < P; ++p) drow[p] += wv * d[p];
        }
      }
      for (std::size_t ci = 0; ci < cin_g; ++ci) {
        float* dst = out.dx.channel(n, g * cin_g + ci);
        for (std::size_t kk = 0; kk < kvol; ++kk) {
          const double* drow = &dcols[(ci * kvol + kk) * P];
          const long* off = &offset[kk * P];
          for (std::size_t p = 0; p < P; ++p) {
            if (off[p] >= 0) dst[off[p]] += static_cast<float>(drow[p]);
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < dw.size(); ++i) out.dw[i] = static_cast<float>(dw[i]);
  return out;
}

Tensor5D pool3d_backward(const Tensor5D& x, const PoolSpec& spec, const Tensor5D& dy) {
  const Shape5& xs = x.shape();
  const Shape5 ys = spec.output_shape(xs);
  require_shape(dy, ys, "pool3d_backward upstream");
  Tensor5D dx(xs);
  const Extent3 k = spec.kernel;
  const float inv = 1.0f / static_cast<float>(k.volume());
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      const float* src = x.channel(n, c);
      float* dst = dx.channel(n, c);
      const float* d = dy.channel(n, c);
      std::size_t p = 0;
      for (std::size_t ot = 0; ot < ys.t; ++ot) {
        for (std::size_t oh = 0; oh < ys.h; ++oh) {
          for (std::size_t ow = 0; ow < ys.w; ++ow, ++p) {
            long best = -1;
            float best_v = -std::numeric_limits<float>::infinity();
            for (std::size_t kt = 0; kt < k.t; ++kt) {
              const long it = tap(ot, kt, spec.stride.t, spec.padding.t, xs.t);
              if (it < 0) continue;
              for (std::size_t kh = 0; kh < k.h; ++kh) {
                const long ih = tap(oh, kh, spec.stride.h, spec.padding.h, xs.h);
                if (ih < 0) continue;
                for (std::size_t kw = 0; kw < k.w; ++kw) {
                  const long iw = tap(ow, kw, spec.stride.w, spec.padding.w, xs.w);
                  if (iw < 0) continue;
                  const long idx = (it * static_cast<long>(xs.h) + ih) * static_cast<long>(xs.w) + iw;
                  if (spec.kind == PoolKind::kAverage) {
                    dst[idx] += d[p] * inv;
                  } else if (best < 0 || src[idx] > best_v) {
                    best = idx;
                    best_v = src[idx];
                  }
                }
              }
            }
            if (spec.kind == PoolKind::kMax && best >= 0) dst[best] += d[p];
          }
        }
      }
    }
  }
  return dx;
}

Tensor5D relu_backward(const Tensor5D& x, const Tensor5D& dy) {
  require_shape(dy, x.shape(), "relu_backward");
  Tensor5D dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
  return dx;
}

BatchNormGrads batchnorm_backward(const Tensor5D& x, const BatchNormParams& p, const Tensor5D& dy) {
  p.validate();
  require_shape(dy, x.shape(), "batchnorm_backward");
  const Shape5& s = x.shape();
  if (p.channels() != s.c) throw ShapeError("batchnorm_backward: parameter length does not match channels");
  BatchNormGrads g{Tensor5D(s), std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  const std::size_t sites = s.sites();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(p.var[c]) + p.eps);
      const float scale = static_cast<float>(p.gamma[c] * inv);
      const float* xv = x.channel(n, c);
      const float* d = dy.channel(n, c);
      float* dx = g.dx.channel(n, c);
      double dg = 0, db = 0;
      for (std::size_t i = 0; i < sites; ++i) {
        dx[i] = d[i] * scale;
        dg += static_cast<double>(d[i]) * (xv[i] - p.mean[c]) * inv;
        db += d[i];
      }
      g.dgamma[c] += dg;
      g.dbeta[c] += db;
    }
  }
  return g;
}

Tensor5D channel_shuffle_backward(const Tensor5D& dy, std::size_t groups) {
  if (groups == 0 || dy.shape().c % groups != 0) {
    throw ShapeError("channel_shuffle_backward: " + std::to_string(dy.shape().c) + " channels, " +
                     std::to_string(groups) + " groups");
  }
  return channel_shuffle(dy, dy.shape().c / groups);
}

std::vector<Tensor5D> concat_backward(const Tensor5D& dy, std::span<const std::size_t> sizes) {
  return split_channels(dy, sizes);
}

Tensor5D split_backward(std::span<const Tensor5D> dys) { return concat_channels(dys); }

LossResult softmax_cross_entropy(const Tensor5D& logits, std::span<const std::size_t> labels) {
  const Shape5& s = logits.shape();
  if (labels.size() != s.n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(s.n));
  }
  const std::size_t sites = s.sites();
  LossResult r;
  r.dlogits = Tensor5D(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] >= s.c) throw std::invalid_argument("label " + std::to_string(labels[n]) + " out of range");
    std::vector<double> z(s.c, 0.0);
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* v = logits.channel(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < sites; ++i) acc += v[i];
      z[c] = acc / static_cast<double>(sites);
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double& v : z) sum += (v = std::exp(v - m));
    for (double& v : z) v /= sum;
    r.loss += -std::log(std::max(z[labels[n]], 1e-300));
    for (std::size_t c = 0; c < s.c; ++c) {
      const double dz = (z[c] - (c == labels[n] ? 1.0 : 0.0)) / static_cast<double>(s.n * sites);
      std::fill_n(r.dlogits.channel(n, c), sites, static_cast<float>(dz));
    }
    r.probs.push_back(std::move(z));
  }
  r.loss /= static_cast<double>(s.n);
  return r;
}

// ---------------------------------------------------------------------------
// Finite-difference checks.

namespace {

constexpr double kStep = 1e-3;
// Denominator floor: gradients smaller than this are compared absolutely.
constexpr double kRelFloor = 1e-4;

Tensor5D random_tensor(const Shape5& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor5D t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Double-precision copies of the operands; the reference forward passes
// below run entirely in 64-bit arithmetic so the differences are not
// swamped by float rounding of the outputs.
using Inputs = std::vector<std::vector<double>>;

std::vector<double> widen(const Tensor5D& t) { return {t.data().begin(), t.data().end()}; }

double dot(const Tensor5D& r, const std::vector<double>& y) {
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += r[i] * y[i];
  return acc;
}

// Compares analytic gradients of a scalar loss with central differences over
// every element of every input.
double fd_compare(Inputs inputs, const std::function<double(const Inputs&)>& loss,
                  const std::vector<Tensor5D>& analytic) {
  double worst = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double orig = inputs[t][i];
      inputs[t][i] = orig + kStep;
      const double up = loss(inputs);
      inputs[t][i] = orig - kStep;
      const double down = loss(inputs);
      inputs[t][i] = orig;
      const double numeric = (up - down) / (2 * kStep);
      const double a = analytic[t][i];
      const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), kRelFloor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

std::vector<double> conv_ref(const Shape5& xs, const std::vector<double>& x, const Conv3DSpec& s,
                             const std::vector<double>& w) {
  const Shape5 ys = s.output_shape(xs);
  const std::size_t cin_g = s.in_channels / s.groups, cout_g = s.out_channels / s.groups;
  std::vector<double> y(ys.numel(), 0.0);
  std::size_t p = 0;
  for (std::size_t n = 0; n < ys.n; ++n)
    for (std::size_t co = 0; co < ys.c; ++co)
      for (std::size_t ot = 0; ot < ys.t; ++ot)
        for (std::size_t oh = 0; oh < ys.h; ++oh)
          for (std::size_t ow = 0; ow < ys.w; ++ow, ++p) {
            double acc = 0;
            const std::size_t g = co / cout_g;
            for (std::size_t ci = 0; ci < cin_g; ++ci)
              for (std::size_t kt = 0; kt < s.kernel.t; ++kt) {
                const long it = tap(ot, kt, s.stride.t, s.padding.t, xs.t);
                for (std::size_t kh = 0; kh < s.kernel.h; ++kh) {
                  const long ih = tap(oh, kh, s.stride.h, s.padding.h, xs.h);
                  for (std::size_t kw = 0; kw < s.kernel.w; ++kw) {
                    const long iw = tap(ow, kw, s.stride.w, s.padding.w, xs.w);
                    if (it < 0 || ih < 0 || iw < 0) continue;
                    const std::size_t xi =
                        (((n * xs.c + g * cin_g + ci) * xs.t + it) * xs.h + ih) * xs.w + iw;
                    const std::size_t wi = (((co * cin_g + ci) * s.kernel.t + kt) * s.kernel.h + kh) * s.kernel.w + kw;
                    acc += x[xi] * w[wi];
                  }
                }
              }
            y[p] = acc;
          }
  return y;
}

std::vector<double> pool_ref(const Shape5& xs, const std::vector<double>& x, const PoolSpec& s) {
  const Shape5 ys = s.output_shape(xs);
  std::vector<double> y(ys.numel());
  std::size_t p = 0;
  for (std::size_t n = 0; n < ys.n; ++n)
    for (std::size_t c = 0; c < ys.c; ++c)
      for (std::size_t ot = 0; ot < ys.t; ++ot)
        for (std::size_t oh = 0; oh < ys.h; ++oh)
          for (std::size_t ow = 0; ow < ys.w; ++ow, ++p) {
            double acc = s.kind == PoolKind::kMax ? -std::numeric_limits<double>::infinity() : 0.0;
            for (std::size_t kt = 0; kt < s.kernel.t; ++kt)
              for (std::size_t kh = 0; kh < s.kernel.h; ++kh)
                for (std::size_t kw = 0; kw < s.kernel.w; ++kw) {
                  const long it = tap(ot, kt, s.stride.t, s.padding.t, xs.t);
                  const long ih = tap(oh, kh, s.stride.h, s.padding.h, xs.h);
                  const long iw = tap(ow, kw, s.stride.w, s.padding.w, xs.w);
                  if (it < 0 || ih < 0 || iw < 0) continue;
                  const double v = x[(((n * xs.c + c) * xs.t + it) * xs.h + ih) * xs.w + iw];
                  acc = s.kind == PoolKind::kMax ? std::max(acc, v) : acc + v;
                }
            y[p] = s.kind == PoolKind::kMax ? acc : acc / static_cast<double>(s.kernel.volume());
          }
  return y;
}

// Small random convolution whose tensors stay within ~1e3 elements.
Conv3DSpec random_conv(Rng& rng, std::size_t groups, Shape5& xs) {
  for (;;) {
    Conv3DSpec s;
    s.groups = groups;
    s.in_channels = groups * pick(rng, 1, 2);
    s.out_channels = groups * pick(rng, 1, 2);
    s.kernel = {pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
    s.stride = {pick(rng, 1, 2), pick(rng, 1, 2), pick(rng, 1, 2)};
    s.padding = {pick(rng, 0, s.kernel.t / 2 + 0), pick(rng, 0, s.kernel.h / 2), pick(rng, 0, s.kernel.w / 2)};
    xs = {1, s.in_channels, pick(rng, 2, 4), pick(rng, 3, 5), pick(rng, 3, 5)};
    try {
      const Shape5 ys = s.output_shape(xs);
      if (xs.numel() <= 1000 && ys.numel() <= 1000 && s.param_count() <= 1000) return s;
    } catch (const ShapeError&) {
    }
  }
}

double check_conv(Rng& rng, std::size_t groups) {
  Shape5 xs;
  const Conv3DSpec spec = random_conv(rng, groups, xs);
  const Tensor5D x = random_tensor(xs, rng);
  const Tensor5D w = random_tensor(spec.weight_shape(), rng);
  const Tensor5D r = random_tensor(spec.output_shape(xs), rng);
  const ConvGrads g = conv3d_backward(x, spec, w, r);
  return fd_compare({widen(x), widen(w)},
                    [&](const Inputs& in) { return dot(r, conv_ref(xs, in[0], spec, in[1])); }, {g.dx, g.dw});
}

double check_pool(Rng& rng, PoolKind kind) {
  PoolSpec spec;
  spec.kind = kind;
  spec.kernel = {pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  spec.stride = {pick(rng, 1, 2), pick(rng, 1, 2), pick(rng, 1, 2)};
  spec.padding = {pick(rng, 0, spec.kernel.t / 2), pick(rng, 0, spec.kernel.h / 2), pick(rng, 0, spec.kernel.w / 2)};
  const Shape5 xs{1, pick(rng, 1, 3), pick(rng, 3, 5), pick(rng, 3, 5), pick(rng, 3, 5)};
  Tensor5D x(xs);
  // Distinct values spaced wider than the step keep max windows tie-free.
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(0.01 * static_cast<double>(perm[i]) - 1.0);
  const Tensor5D r = random_tensor(spec.output_shape(xs), rng);
  const Tensor5D dx = pool3d_backward(x, spec, r);
  return fd_compare({widen(x)}, [&](const Inputs& in) { return dot(r, pool_ref(xs, in[0], spec)); }, {dx});
}

double check_relu(Rng& rng) {
  const Shape5 xs{1, pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 2, 5), pick(rng, 2, 5)};
  Tensor5D x = random_tensor(xs, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::fabs(x[i]) < 0.05f) x[i] = x[i] < 0 ? -0.5f : 0.5f;
  }
  const Tensor5D r = random_tensor(xs, rng);
  return fd_compare(
      {widen(x)},
      [&](const Inputs& in) {
        double acc = 0;
        for (std::size_t i = 0; i < in[0].size(); ++i) acc += r[i] * std::max(0.0, in[0][i]);
        return acc;
      },
      {relu_backward(x, r)});
}

double check_batchnorm(Rng& rng) {
  const Shape5 xs{pick(rng, 1, 2), pick(rng, 1, 4), pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 2, 4)};
  const Shape5 ps{1, xs.c, 1, 1, 1};
  const Tensor5D x = random_tensor(xs, rng);
  const Tensor5D gamma = random_tensor(ps, rng, 0.5, 2.0);
  const Tensor5D beta = random_tensor(ps, rng);
  BatchNormParams base = BatchNormParams::identity(xs.c);
  for (std::size_t c = 0; c < xs.c; ++c) {
    base.mean[c] = static_cast<float>(rng.uniform(-0.5, 0.5));
    base.var[c] = static_cast<float>(rng.uniform(0.2, 2.0));
  }
  BatchNormParams p = base;
  p.gamma.assign(gamma.raw(), gamma.raw() + gamma.size());
  p.beta.assign(beta.raw(), beta.raw() + beta.size());
  const Tensor5D r = random_tensor(xs, rng);
  const BatchNormGrads g = batchnorm_backward(x, p, r);
  Tensor5D dgamma(ps), dbeta(ps);
  for (std::size_t c = 0; c < xs.c; ++c) {
    dgamma[c] = static_cast<float>(g.dgamma[c]);
    dbeta[c] = static_cast<float>(g.dbeta[c]);
  }
  const std::size_t sites = xs.sites();
  auto loss = [&](const Inputs& in) {
    double acc = 0;
    for (std::size_t i = 0; i < in[0].size(); ++i) {
      const std::size_t c = (i / sites) % xs.c;
      const double inv = 1.0 / std::sqrt(static_cast<double>(base.var[c]) + base.eps);
      acc += r[i] * (in[1][c] * (in[0][i] - base.mean[c]) * inv + in[2][c]);
    }
    return acc;
  };
  return fd_compare({widen(x), widen(gamma), widen(beta)}, loss, {g.dx, dgamma, dbeta});
}

double check_softmax_xent(Rng& rng) {
  const Shape5 s{pick(rng, 1, 3), pick(rng, 2, 6), pick(rng, 1, 3), pick(rng, 1, 2), pick(rng, 1, 2)};
  const Tensor5D logits = random_tensor(s, rng, -3.0, 3.0);
  std::vector<std::size_t> labels(s.n);
  for (auto& l : labels) l = rng.below(s.c);
  const LossResult res = softmax_cross_entropy(logits, labels);
  // The loss is already accumulated in double; only the perturbed logit is rounded.
  auto loss = [&](const Inputs& in) {
    double total = 0;
    const std::size_t sites = s.sites();
    for (std::size_t n = 0; n < s.n; ++n) {
      std::vector<double> z(s.c, 0.0);
      for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t i = 0; i < sites; ++i) z[c] += in[0][(n * s.c + c) * sites + i];
        z[c] /= static_cast<double>(sites);
      }
      const double m = *std::max_element(z.begin(), z.end());
      double sum = 0;
      for (double v : z) sum += std::exp(v - m);
      total += std::log(sum) + m - z[labels[n]];
    }
    return total / static_cast<double>(s.n);
  };
  return fd_compare({widen(logits)}, loss, {res.dlogits});
}

// Permutation ops: tensors hold their own flat index, so the forward output
// tells exactly where each element went and the gradient must be the
// upstream values carried back along the same map.
Tensor5D index_tensor(const Shape5& s, std::size_t start = 0) {
  Tensor5D t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(start + i);
  return t;
}

bool check_shuffle(Rng& rng) {
  const std::size_t g = pick(rng, 1, 6);
  const Shape5 s{pick(rng, 1, 2), g * pick(rng, 1, 5), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  const Tensor5D x = index_tensor(s);
  const Tensor5D y = channel_shuffle(x, g);
  const Tensor5D r = random_tensor(s, rng);
  const Tensor5D dx = channel_shuffle_backward(r, g);
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (dx[static_cast<std::size_t>(y[j])] != r[j]) return false;
  }
  return true;
}

std::vector<std::size_t> random_sizes(Rng& rng, std::size_t parts) {
  std::vector<std::size_t> sizes(parts);
  for (auto& v : sizes) v = pick(rng, 1, 5);
  return sizes;
}

bool check_split(Rng& rng) {
  const auto sizes = random_sizes(rng, pick(rng, 1, 4));
  const Shape5 s{pick(rng, 1, 2), std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), pick(rng, 1, 3),
                 pick(rng, 1, 3), pick(rng, 1, 3)};
  const Tensor5D x = index_tensor(s);
  const auto ys = split_channels(x, sizes);
  std::vector<Tensor5D> dys;
  for (const auto& y : ys) dys.push_back(random_tensor(y.shape(), rng));
  const Tensor5D dx = split_backward(dys);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    for (std::size_t j = 0; j < ys[k].size(); ++j) {
      if (dx[static_cast<std::size_t>(ys[k][j])] != dys[k][j]) return false;
    }
  }
  return true;
}

bool check_concat(Rng& rng) {
  const auto sizes = random_sizes(rng, pick(rng, 1, 4));
  const Shape5 base{pick(rng, 1, 2), 1, pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  std::vector<Tensor5D> xs;
  std::size_t start = 0;
  for (std::size_t sz : sizes) {
    Shape5 s = base;
    s.c = sz;
    xs.push_back(index_tensor(s, start));
    start += xs.back().size();
  }
  const Tensor5D y = concat_channels(xs);
  std::vector<std::size_t> where(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) where[static_cast<std::size_t>(y[j])] = j;
  const Tensor5D r = random_tensor(y.shape(), rng);
  const auto dxs = concat_backward(r, sizes);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      if (dxs[k][i] != r[where[static_cast<std::size_t>(xs[k][i])]]) return false;
    }
  }
  return true;
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {"conv3d", "conv3d_grouped", "maxpool", "avgpool",      "relu",
                                               "batchnorm", "shuffle",     "split",   "concat", "softmax_xent"};
  return ops;
}

GradcheckResult gradcheck(const std::string& op, std::size_t trials, std::uint64_t seed) {
  const auto& ops = gradcheck_ops();
  if (std::find(ops.begin(), ops.end(), op) == ops.end()) {
    throw std::invalid_argument("unknown gradcheck op '" + op + "'");
  }
  GradcheckResult res;
  res.op = op;
  res.trials = trials;
  Rng rng(seed);
  const bool permutation = op == "shuffle" || op == "split" || op == "concat";
  res.exact = permutation;
  for (std::size_t t = 0; t < trials; ++t) {
    double err = 0;
    if (op == "conv3d") {
      err = check_conv(rng, 1);
    } else if (op == "conv3d_grouped") {
      err = check_conv(rng, pick(rng, 2, 3));
    } else if (op == "maxpool") {
      err = check_pool(rng, PoolKind::kMax);
    } else if (op == "avgpool") {
      err = check_pool(rng, PoolKind::kAverage);
    } else if (op == "relu") {
      err = check_relu(rng);
    } else if (op == "batchnorm") {
      err = check_batchnorm(rng);
    } else if (op == "softmax_xent") {
      err = check_softmax_xent(rng);
    } else {
      const bool ok = op == "shuffle" ? check_shuffle(rng) : op == "split" ? check_split(rng) : check_concat(rng);
      err = ok ? 0.0 : 1.0;
    }
    res.max_rel_error = std::max(res.max_rel_error, err);
  }
  return res;
}

}  // namespace lw3d
