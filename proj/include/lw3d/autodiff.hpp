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
#include <span>
#include <string>
#include <vector>

#include "lw3d/nn_ops.hpp"
#include "lw3d/tensor.hpp"

namespace lw3d {

// Value, gradient and momentum buffers of one trainable tensor.
struct Parameter {
  Tensor5D value;
  Tensor5D grad;
  Tensor5D momentum;

  Parameter() = default;
  explicit Parameter(Tensor5D v);
  void zero_grad();
};

struct TrainConfig {
  float learning_rate = 0.1f;
  float momentum = 0.9f;
  float lr_decay_factor = 10.0f;
  std::size_t batch_size = 4;
  std::size_t epochs = 50;
  // Epochs without an improvement larger than plateau_threshold before decaying.
  std::size_t plateau_patience = 3;
  double plateau_threshold = 1e-3;
  // Rescales the joint gradient to at most this L2 norm before each step; 0 disables.
  double grad_clip_norm = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// g <- g * min(1, clip/|g|) when clipping; v <- m*v + g; w <- w - lr*v; g <- 0.
void sgd_step(std::span<Parameter* const> params, const TrainConfig& cfg, float lr);

// Divides the learning rate once the monitored loss stops improving.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const TrainConfig& cfg);
  // Feeds one epoch loss; returns the learning rate for the next epoch.
  float step(double loss);
  float lr() const { return lr_; }
  std::size_t decays() const { return decays_; }

 private:
  float lr_;
  float factor_;
  std::size_t patience_;
  double threshold_;
  double best_;
  std::size_t stale_ = 0;
  std::size_t decays_ = 0;
};

struct ConvGrads {
  Tensor5D dx;
  Tensor5D dw;
};
ConvGrads conv3d_backward(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w, const Tensor5D& dy);

// Max pooling routes each upstream value to the first maximal input of its
// window in layout order.
Tensor5D pool3d_backward(const Tensor5D& x, const PoolSpec& spec, const Tensor5D& dy);

Tensor5D relu_backward(const Tensor5D& x, const Tensor5D& dy);

struct BatchNormGrads {
  Tensor5D dx;
  std::vector<double> dgamma;
  std::vector<double> dbeta;
};
// Frozen statistics: mean and variance are constants.
BatchNormGrads batchnorm_backward(const Tensor5D& x, const BatchNormParams& p, const Tensor5D& dy);

Tensor5D channel_shuffle_backward(const Tensor5D& dy, std::size_t groups);
std::vector<Tensor5D> concat_backward(const Tensor5D& dy, std::span<const std::size_t> sizes);
Tensor5D split_backward(std::span<const Tensor5D> dys);

struct LossResult {
  double loss = 0;  // mean over the batch
  Tensor5D dlogits;
  std::vector<std::vector<double>> probs;  // per sample
};
// Cross-entropy of the softmax of position-averaged logits, one label per
// batch item.
LossResult softmax_cross_entropy(const Tensor5D& logits, std::span<const std::size_t> labels);

struct GradcheckResult {
  std::string op;
  std::size_t trials = 0;
  double max_rel_error = 0;
  bool exact = false;  // permutation ops are compared for equality
};

// Names accepted by gradcheck().
const std::vector<std::string>& gradcheck_ops();

// Central differences with step 1e-3 against the analytic gradient of
// L = sum(r * y) for a random upstream r, accumulated in double.
GradcheckResult gradcheck(const std::string& op, std::size_t trials, std::uint64_t seed);

}  // namespace lw3d
