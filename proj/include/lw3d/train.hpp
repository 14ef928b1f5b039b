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

#include <functional>
#include <map>
#include <span>
#include <vector>

#include "lw3d/autodiff.hpp"
#include "lw3d/executor.hpp"
#include "lw3d/graph.hpp"

namespace lw3d {

struct Sample {
  Tensor5D clip;  // batch dimension 1
  std::size_t label = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0;
  double accuracy = 0;
  float lr = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  NetworkWeights weights;
};

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
};

// Stacks clips along the batch axis.
Tensor5D stack_clips(std::span<const Sample> data, std::span<const std::size_t> indices);

// Gradient engine over a whole graph. Convolution weights and batch-norm
// scale/shift are trainable.
class Trainer {
 public:
  Trainer(const ModuleGraph& g, NetworkWeights w);

  // Forward + backward on one batch; gradients accumulate into parameters.
  LossResult accumulate(const Tensor5D& x, std::span<const std::size_t> labels);
  void step(const TrainConfig& cfg, float lr);

  const NetworkWeights& weights() const { return w_; }
  std::vector<Parameter*> parameters();
  // Gradient of a conv weight or "<bn id>/gamma", "<bn id>/beta".
  const Parameter& parameter(const std::string& name) const { return params_.at(name); }

 private:
  void sync();

  const ModuleGraph& g_;
  NetworkWeights w_;
  std::map<std::string, Parameter> params_;
  std::size_t logits_index_;
};

EvalResult evaluate(const ModuleGraph& g, const NetworkWeights& w, std::span<const Sample> data,
                    std::size_t batch_size);

// SGD with momentum and plateau decay on the training loss, evaluated after
// each epoch. Batch-norm statistics stay as given in `init`; only scale and
// shift learn. `on_epoch` observes each epoch as it completes.
TrainResult train_toy(const ModuleGraph& g, std::span<const Sample> data, const TrainConfig& cfg,
                      NetworkWeights init, const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace lw3d
