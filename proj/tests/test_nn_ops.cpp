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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lw3d/nn_ops.hpp"
#include "test_util.hpp"

using namespace lw3d;
using lw3d::testing::conv_oracle;
using lw3d::testing::random_tensor;

namespace {

Conv3DSpec conv(std::size_t in, std::size_t out, Extent3 k, Extent3 s = {1, 1, 1}, Extent3 p = {0, 0, 0},
                std::size_t g = 1) {
  Conv3DSpec c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = k;
  c.stride = s;
  c.padding = p;
  c.groups = g;
  return c;
}

double max_diff(const Tensor5D& y, const std::vector<double>& ref) {
  double m = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) m = std::max(m, std::abs(y[i] - ref[i]));
  return m;
}

bool bit_equal(const Tensor5D& a, const Tensor5D& b) {
  return a.shape() == b.shape() && std::memcmp(a.raw(), b.raw(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("identity 1x1x1 convolution") {
  Rng rng(1);
  const Tensor5D x = random_tensor({1, 1, 3, 4, 5}, rng);
  const Conv3DSpec s = conv(1, 1, {1, 1, 1});
  const Tensor5D w = full(s.weight_shape(), 1.0f);
  CHECK(conv3d_direct(x, s, w) == x);
  CHECK(conv3d_lowered(x, s, w) == x);
}

TEST_CASE("all-ones 3x3x3 gives 27") {
  const Conv3DSpec s = conv(1, 1, {3, 3, 3});
  const Tensor5D y = conv3d_direct(full({1, 1, 3, 3, 3}, 1.0f), s, full(s.weight_shape(), 1.0f));
  CHECK(y.shape() == Shape5{1, 1, 1, 1, 1});
  CHECK(y[0] == 27.0f);
  CHECK(conv3d_lowered(full({1, 1, 3, 3, 3}, 1.0f), s, full(s.weight_shape(), 1.0f))[0] == 27.0f);
}

TEST_CASE("padded 3x3x3 matches the brute-force oracle") {
  Rng rng(2);
  const Tensor5D x = random_tensor({1, 2, 4, 5, 5}, rng);
  const Conv3DSpec s = conv(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  const Tensor5D w = random_tensor(s.weight_shape(), rng);
  Shape5 os;
  const auto ref = conv_oracle(x, s, w, os);
  const Tensor5D yd = conv3d_direct(x, s, w);
  REQUIRE(yd.shape() == os);
  CHECK(max_diff(yd, ref) <= 1e-4);
  CHECK(max_diff(conv3d_lowered(x, s, w), ref) <= 1e-4);
}

TEST_CASE("grouped convolution, groups=2, in=out=4") {
  Rng rng(3);
  const Tensor5D x = random_tensor({1, 4, 3, 4, 4}, rng);
  const Conv3DSpec s = conv(4, 4, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, 2);
  const Tensor5D w = random_tensor(s.weight_shape(), rng);
  CHECK(w.shape() == Shape5{4, 2, 3, 3, 3});
  CHECK(max_abs_diff(conv3d_direct(x, s, w), conv3d_lowered(x, s, w)) <= 1e-4);
}

TEST_CASE("convolution parameter validation and shape errors") {
  CHECK_THROWS(conv(3, 4, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, 2).validate());
  CHECK_THROWS(conv(4, 4, {1, 1, 1}, {0, 1, 1}).validate());
  const Conv3DSpec s = conv(2, 2, {3, 3, 3});
  CHECK_THROWS_AS(s.output_shape({1, 3, 4, 4, 4}), ShapeError);
  CHECK_THROWS_AS(s.output_shape({1, 2, 2, 4, 4}), ShapeError);
  CHECK_THROWS_AS(conv3d_direct(zeros({1, 2, 4, 4, 4}), s, zeros({2, 2, 1, 1, 1})), ShapeError);
  CHECK(conv(64, 192, {3, 3, 3}).param_count() == 331776);
}

TEST_CASE("property: direct and lowered agree over 250 random configurations") {
  Rng rng(20260101);
  int grouped = 0;
  for (int trial = 0; trial < 250; ++trial) {
    const std::size_t g = 1 + rng.below(3);
    const std::size_t in = g * (1 + rng.below(3));
    const std::size_t out = g * (1 + rng.below(3));
    const Extent3 k{1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3)};
    const Extent3 st{1 + rng.below(2), 1 + rng.below(2), 1 + rng.below(2)};
    const Extent3 p{rng.below(k.t), rng.below(k.h), rng.below(k.w)};
    const Shape5 xs{1 + rng.below(2), in, k.t + rng.below(3), k.h + rng.below(4), k.w + rng.below(4)};
    const Conv3DSpec s = conv(in, out, k, st, p, g);
    grouped += g > 1 ? 1 : 0;
    const Tensor5D x = random_tensor(xs, rng);
    const Tensor5D w = random_tensor(s.weight_shape(), rng);
    Shape5 os;
    const auto ref = conv_oracle(x, s, w, os);
    const Tensor5D yd = conv3d_direct(x, s, w);
    const Tensor5D yl = conv3d_lowered(x, s, w);
    REQUIRE(yd.shape() == os);
    REQUIRE(yl.shape() == os);
    CHECK(max_abs_diff(yd, yl) <= 1e-4);
    CHECK(max_diff(yd, ref) <= 1e-4);
  }
  CHECK(grouped >= 100);
}

TEST_CASE("property: grouped conv equals concatenated dense convolutions per block") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t g = 2 + rng.below(3);
    const std::size_t cg = 1 + rng.below(3), og = 1 + rng.below(3);
    const Conv3DSpec s = conv(g * cg, g * og, {1 + rng.below(3), 3, 3}, {1, 1, 1}, {0, 1, 1}, g);
    const Tensor5D x = random_tensor({1, g * cg, 3, 5, 5}, rng);
    const Tensor5D w = random_tensor(s.weight_shape(), rng);
    std::vector<std::size_t> in_sizes(g, cg), w_sizes(1, 0);
    const auto xs = split_channels(x, in_sizes);
    std::vector<Tensor5D> ys;
    const std::size_t per_out = w.size() / w.shape().n;
    for (std::size_t b = 0; b < g; ++b) {
      Conv3DSpec d = s;
      d.in_channels = cg;
      d.out_channels = og;
      d.groups = 1;
      Tensor5D wb(d.weight_shape());
      std::copy_n(w.raw() + b * og * per_out, og * per_out, wb.raw());
      ys.push_back(conv3d_direct(xs[b], d, wb));
    }
    CHECK(max_abs_diff(concat_channels(ys), conv3d_lowered(x, s, w)) <= 1e-4);
  }
}

TEST_CASE("property: groups=1 equals a dense loop with the same summation order bit-for-bit") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Conv3DSpec s = conv(1 + rng.below(4), 1 + rng.below(4), {1 + rng.below(3), 1 + rng.below(3), 3},
                              {1, 1 + rng.below(2), 1}, {0, 0, 1});
    const Tensor5D x = random_tensor({1, s.in_channels, 3, 4, 4}, rng);
    const Tensor5D w = random_tensor(s.weight_shape(), rng);
    Shape5 os;
    const auto ref = conv_oracle(x, s, w, os);
    Tensor5D dense(os);
    for (std::size_t i = 0; i < ref.size(); ++i) dense[i] = static_cast<float>(ref[i]);
    CHECK(bit_equal(conv3d_direct(x, s, w), dense));
  }
}

TEST_CASE("property: factorized pair equals the composite kernel (60 instances)") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t C = 1 + rng.below(3), M = 1 + rng.below(3), O = 1 + rng.below(3);
    const std::size_t kt = 1 + 2 * rng.below(2), kh = 1 + 2 * rng.below(2), kw = 1 + 2 * rng.below(2);
    const Conv3DSpec ss = conv(C, M, {1, kh, kw}, {1, 1, 1}, {0, kh / 2, kw / 2});
    const Conv3DSpec ts = conv(M, O, {kt, 1, 1}, {1, 1, 1}, {kt / 2, 0, 0});
    const Conv3DSpec fs = conv(C, O, {kt, kh, kw}, {1, 1, 1}, {kt / 2, kh / 2, kw / 2});
    const Tensor5D Ks = random_tensor(ss.weight_shape(), rng);
    const Tensor5D Kt = random_tensor(ts.weight_shape(), rng);
    Tensor5D K(fs.weight_shape());
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t a = 0; a < kt; ++a)
          for (std::size_t y = 0; y < kh; ++y)
            for (std::size_t x = 0; x < kw; ++x) {
              double acc = 0;
              for (std::size_t m = 0; m < M; ++m) acc += double(Kt.at(o, m, a, 0, 0)) * Ks.at(m, c, 0, y, x);
              K.at(o, c, a, y, x) = static_cast<float>(acc);
            }
    // Temporal zero padding of the spatial output is equivalent to padding
    // the input, because the spatial conv has no bias.
    const Tensor5D x = random_tensor({1, C, 3 + rng.below(3), 4, 4}, rng);
    const Tensor5D two = conv3d_lowered(conv3d_lowered(x, ss, Ks), ts, Kt);
    CHECK(max_abs_diff(two, conv3d_direct(x, fs, K)) <= 1e-4);
  }
}

TEST_CASE("channel shuffle permutation") {
  CHECK(shuffle_destination(0, 480, 16) == 0);
  CHECK(shuffle_destination(31, 480, 16) == 17);
  Rng rng(8);
  const Tensor5D x = random_tensor({1, 6, 1, 2, 2}, rng);
  CHECK(channel_shuffle(x, 1) == x);
  const Tensor5D y = channel_shuffle(x, 2);
  // c = i*(C/g)+j -> j*g+i with C/g = 3
  CHECK(y.at(0, 1, 0, 1, 1) == x.at(0, 3, 0, 1, 1));
  CHECK(y.at(0, 2, 0, 0, 0) == x.at(0, 1, 0, 0, 0));
  CHECK_THROWS_AS(channel_shuffle(x, 4), ShapeError);
}

TEST_CASE("property: shuffle(g) then shuffle(C/g) restores the input") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t g = 1 + rng.below(6), n = 1 + rng.below(6);
    const Tensor5D x = random_tensor({1, g * n, 2, 2, 2}, rng);
    CHECK(channel_shuffle(channel_shuffle(x, g), n) == x);
  }
}

TEST_CASE("pooling") {
  const Tensor5D x({1, 1, 1, 2, 2}, {1, 2, 3, 4});
  PoolSpec p{PoolKind::kMax, {1, 2, 2}, {1, 1, 1}, {0, 0, 0}};
  CHECK(pool3d(x, p)[0] == 4.0f);
  p.kind = PoolKind::kAverage;
  CHECK(pool3d(x, p)[0] == 2.5f);
  const PoolSpec stem{PoolKind::kMax, {1, 3, 3}, {1, 2, 2}, {0, 1, 1}};
  CHECK(stem.output_shape({1, 64, 16, 112, 112}) == Shape5{1, 64, 16, 56, 56});
  // Max pooling pads with -inf, so an all-negative input never yields 0.
  const Tensor5D neg = full({1, 1, 1, 3, 3}, -2.0f);
  const Tensor5D pooled = pool3d(neg, stem);
  for (float v : pooled.data()) CHECK(v == -2.0f);
  OpCounter ops;
  pool3d(zeros({1, 2, 1, 4, 4}), stem, &ops);
  CHECK(ops.pool_ops == 2 * 2 * 2 * 9);
}

TEST_CASE("batch norm") {
  BatchNormParams p = BatchNormParams::identity(1);
  p.eps = 0;
  Rng rng(10);
  const Tensor5D x = random_tensor({1, 1, 2, 2, 2}, rng);
  CHECK(batchnorm_infer(x, p) == x);
  p.gamma = {2};
  p.beta = {1};
  p.mean = {3};
  p.var = {4};
  CHECK(batchnorm_infer(full({1, 1, 1, 1, 1}, 5.0f), p)[0] == doctest::Approx(3.0));
  BatchNormParams z = BatchNormParams::identity(1);
  z.var = {0};
  CHECK(std::isfinite(batchnorm_infer(full({1, 1, 1, 1, 1}, 5.0f), z)[0]));
  CHECK_THROWS(batchnorm_infer(zeros({1, 2, 1, 1, 1}), z));
}

TEST_CASE("softmax") {
  const Tensor5D eq = softmax_channels(Tensor5D({1, 2, 1, 1, 1}, {1.5f, 1.5f}));
  CHECK(eq[0] == doctest::Approx(0.5));
  const Tensor5D l3 = softmax_channels(Tensor5D({1, 2, 1, 1, 1}, {0.0f, std::log(3.0f)}));
  CHECK(l3[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(l3[1] == doctest::Approx(0.75).epsilon(1e-6));
  Rng rng(11);
  const Tensor5D x = random_tensor({2, 5, 1, 2, 2}, rng);
  const Tensor5D shifted = map_elementwise(x, [](float v) { return v + 100.0f; });
  CHECK(max_abs_diff(softmax_channels(x), softmax_channels(shifted)) <= 1e-6);
}

TEST_CASE("property: softmax sums to one, including logits up to 1e3") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const double mag = trial % 2 == 0 ? 1e3 : 5.0;
    const Tensor5D x = random_tensor({2, 2 + rng.below(8), 2, 2, 2}, rng, -mag, mag);
    const Tensor5D y = softmax_channels(x);
    const Shape5& s = y.shape();
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.sites(); ++i) {
        double sum = 0;
        for (std::size_t c = 0; c < s.c; ++c) sum += y.channel(n, c)[i];
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
  }
}

TEST_CASE("weight init is seeded and bounded") {
  const Conv3DSpec s = conv(8, 16, {3, 3, 3});
  const Tensor5D a = init_conv_weights(s, 5), b = init_conv_weights(s, 5), c = init_conv_weights(s, 6);
  CHECK(a == b);
  CHECK(!(a == c));
  const double bound = std::sqrt(6.0 / (8 * 27 + 16 * 27));
  for (float v : a.data()) CHECK(std::abs(v) <= bound);
  const double he = std::sqrt(6.0 / (8 * 27));
  float mx = 0;
  const Tensor5D h = init_conv_weights(s, 5, InitScheme::kHe);
  for (float v : h.data()) mx = std::max(mx, std::abs(v));
  CHECK(mx <= he);
  CHECK(mx > bound);
}

TEST_CASE("op counter tallies padded taps") {
  const Conv3DSpec s = conv(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  OpCounter ops;
  conv3d_direct(zeros({2, 2, 2, 3, 3}), s, zeros(s.weight_shape()), &ops);
  CHECK(ops.macs == 2ull * 3 * 2 * 3 * 3 * 2 * 27);
}
