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

#pragma once

#include <cstdint>

#include "lw3d/nn_ops.hpp"
#include "lw3d/rng.hpp"
#include "lw3d/tensor.hpp"

namespace lw3d::testing {

inline Tensor5D random_tensor(const Shape5& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor5D t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Six-nested-loop convolution in double, written independently of the
// library kernels. Handles groups, stride and zero padding.
inline std::vector<double> conv_oracle(const Tensor5D& x, const Conv3DSpec& s, const Tensor5D& w, Shape5& out) {
  const Shape5& in = x.shape();
  auto ext = [](std::size_t n, std::size_t k, std::size_t st, std::size_t p) { return (n + 2 * p - k) / st + 1; };
  out = {in.n, s.out_channels, ext(in.t, s.kernel.t, s.stride.t, s.padding.t),
         ext(in.h, s.kernel.h, s.stride.h, s.padding.h), ext(in.w, s.kernel.w, s.stride.w, s.padding.w)};
  const std::size_t cg = s.in_channels / s.groups, og = s.out_channels / s.groups;
  std::vector<double> y(out.numel(), 0.0);
  std::size_t i = 0;
  for (std::size_t n = 0; n < out.n; ++n)
    for (std::size_t o = 0; o < out.c; ++o)
      for (std::size_t t = 0; t < out.t; ++t)
        for (std::size_t h = 0; h < out.h; ++h)
          for (std::size_t ww = 0; ww < out.w; ++ww, ++i) {
            double acc = 0;
            for (std::size_t c = 0; c < cg; ++c)
              for (std::size_t a = 0; a < s.kernel.t; ++a)
                for (std::size_t b = 0; b < s.kernel.h; ++b)
                  for (std::size_t d = 0; d < s.kernel.w; ++d) {
                    const long ti = long(t * s.stride.t + a) - long(s.padding.t);
                    const long hi = long(h * s.stride.h + b) - long(s.padding.h);
                    const long wi = long(ww * s.stride.w + d) - long(s.padding.w);
                    if (ti < 0 || hi < 0 || wi < 0 || ti >= long(in.t) || hi >= long(in.h) || wi >= long(in.w)) continue;
                    acc += double(w.at(o, c, a, b, d)) * x.at(n, (o / og) * cg + c, ti, hi, wi);
                  }
            y[i] = acc;
          }
  return y;
}

}  // namespace lw3d::testing
