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
#include <numeric>

#include "lw3d/autodiff.hpp"
#include "test_util.hpp"

using namespace lw3d;
using lw3d::testing::random_tensor;

TEST_CASE("every differentiable op passes the finite-difference check") {
  for (const std::string& op : gradcheck_ops()) {
    CAPTURE(op);
    const GradcheckResult r = gradcheck(op, 20, 11);
    CHECK(r.trials == 20);
    if (r.exact) {
      CHECK(r.max_rel_error == 0.0);
    } else {
      CHECK(r.max_rel_error <= 1e-2);
    }
  }
  CHECK_THROWS(gradcheck("nonexistent", 1, 0));
}

TEST_CASE("permutation ops are checked exactly") {
  for (const char* op : {"shuffle", "split", "concat"}) CHECK(gradcheck(op, 20, 3).exact);
}

TEST_CASE("conv weight gradient on a (1,2,3,4,4) instance matches central differences") {
  Rng rng(5);
  const Tensor5D x = random_tensor({1, 2, 3, 4, 4}, rng);
  const Conv3DSpec s{2, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, 1};
  Tensor5D w = random_tensor(s.weight_shape(), rng);
  const Tensor5D r = random_tensor(s.output_shape(x.shape()), rng);
  const ConvGrads g = conv3d_backward(x, s, w, r);
  auto loss = [&](const Tensor5D& wt) {
    const Tensor5D y = conv3d_direct(x, s, wt);
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += double(y[i]) * r[i];
    return acc;
  };
  for (std::size_t i = 0; i < w.size(); i += 7) {
    const float keep = w[i];
    w[i] = keep + 1e-3f;
    const double up = loss(w);
    w[i] = keep - 1e-3f;
    const double down = loss(w);
    w[i] = keep;
    const double num = (up - down) / 2e-3;
    CHECK(std::abs(num - g.dw[i]) / std::max({std::abs(num), std::abs(double(g.dw[i])), 1e-4}) <= 1e-2);
  }
}

TEST_CASE("relu backward blocks negative inputs") {
  const Tensor5D x({1, 2, 1, 1, 1}, {-1.0f, 2.0f});
  const Tensor5D d = relu_backward(x, full(x.shape(), 1.0f));
  CHECK(d[0] == 0.0f);
  CHECK(d[1] == 1.0f);
}

TEST_CASE("shuffle backward is the inverse permutation") {
  Rng rng(6);
  const Tensor5D dy = random_tensor({1, 12, 1, 2, 2}, rng);
  const Tensor5D dx = channel_shuffle_backward(dy, 3);
  CHECK(channel_shuffle(dx, 3) == dy);
  CHECK(dx == channel_shuffle(dy, 4));
}

TEST_CASE("split and concat backward") {
  Rng rng(7);
  const Tensor5D dy = random_tensor({1, 5, 1, 2, 2}, rng);
  const std::size_t sizes[] = {2, 3};
  const auto parts = concat_backward(dy, sizes);
  CHECK(split_backward(parts) == dy);
}

TEST_CASE("max pool routes to the first maximum") {
  const Tensor5D x({1, 1, 1, 2, 2}, {3, 5, 5, 1});
  const PoolSpec p{PoolKind::kMax, {1, 2, 2}, {1, 1, 1}, {0, 0, 0}};
  const Tensor5D dx = pool3d_backward(x, p, full({1, 1, 1, 1, 1}, 2.0f));
  CHECK(dx[0] == 0.0f);
  CHECK(dx[1] == 2.0f);
  CHECK(dx[2] == 0.0f);
}

TEST_CASE("softmax cross-entropy") {
  const Tensor5D logits({1, 2, 1, 1, 1}, {0.0f, 0.0f});
  const std::size_t label[] = {1};
  const LossResult r = softmax_cross_entropy(logits, label);
  CHECK(r.loss == doctest::Approx(std::log(2.0)));
  CHECK(r.dlogits[0] == doctest::Approx(0.5));
  CHECK(r.dlogits[1] == doctest::Approx(-0.5));
  const std::size_t bad[] = {2};
  CHECK_THROWS(softmax_cross_entropy(logits, bad));
  const std::size_t two[] = {0, 1};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, two), ShapeError);
}

TEST_CASE("sgd step examples") {
  TrainConfig cfg;
  cfg.momentum = 0;
  Parameter p(zeros({1, 1, 1, 1, 1}));
  p.grad[0] = 2;
  Parameter* ps[] = {&p};
  sgd_step(ps, cfg, 1.0f);
  CHECK(p.value[0] == -2.0f);
  CHECK(p.grad[0] == 0.0f);

  cfg.momentum = 0.9f;
  Parameter q(zeros({1, 1, 1, 1, 1}));
  Parameter* qs[] = {&q};
  q.grad[0] = 1;
  sgd_step(qs, cfg, 1.0f);
  q.grad[0] = 1;
  sgd_step(qs, cfg, 1.0f);
  CHECK(q.value[0] == doctest::Approx(-2.9));

  Rng rng(8);
  Parameter still(random_tensor({1, 2, 1, 2, 2}, rng));
  const Tensor5D before = still.value;
  Parameter* ss[] = {&still};
  sgd_step(ss, cfg, 0.1f);
  CHECK(still.value == before);
}

TEST_CASE("gradient clipping bounds the joint step") {
  TrainConfig cfg;
  cfg.momentum = 0;
  cfg.grad_clip_norm = 1.0;
  Parameter a(zeros({1, 1, 1, 1, 1})), b(zeros({1, 1, 1, 1, 1}));
  a.grad[0] = 3;
  b.grad[0] = 4;
  Parameter* ps[] = {&a, &b};
  sgd_step(ps, cfg, 1.0f);
  CHECK(a.value[0] == doctest::Approx(-0.6));
  CHECK(b.value[0] == doctest::Approx(-0.8));
  cfg.grad_clip_norm = -1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("plateau scheduler") {
  TrainConfig cfg;
  cfg.plateau_patience = 3;
  PlateauScheduler s(cfg);
  CHECK(s.step(1.0) == doctest::Approx(0.1f));
  CHECK(s.step(1.0) == doctest::Approx(0.1f));
  CHECK(s.step(1.0) == doctest::Approx(0.1f));
  CHECK(s.step(1.0) == doctest::Approx(0.01f));
  CHECK(s.decays() == 1);
  CHECK(s.step(0.5) == doctest::Approx(0.01f));
  // Improvements below the threshold count as stale.
  CHECK(s.step(0.4999) == doctest::Approx(0.01f));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.momentum = 1;
  CHECK_THROWS(c.validate());
  c = {};
  c.lr_decay_factor = 1;
  CHECK_THROWS(c.validate());
}
