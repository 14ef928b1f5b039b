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
#include <functional>
#include <span>
#include <map>
#include <string>
#include <vector>

#include "lw3d/graph.hpp"
#include "lw3d/nn_ops.hpp"
#include "lw3d/tensor.hpp"

namespace lw3d {

// Thrown when a weight file disagrees with the graph it is loaded into.
class WeightError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkWeights {
  std::map<std::string, Tensor5D> conv;
  std::map<std::string, BatchNormParams> bn;
};

// Seeded conv weights (seed mixed with the layer position) and identity
// batch-norm.
NetworkWeights init_weights(const ModuleGraph& g, std::uint64_t seed, InitScheme scheme = InitScheme::kGlorot);
// All conv weights zero, batch-norm identity.
NetworkWeights zero_weights(const ModuleGraph& g);

// Text manifest header followed by one tensor record per manifest line.
// A batch-norm record has dims (4, C, 1, 1, 1): gamma, beta, mean, var.
void save_weights(const std::string& path, const ModuleGraph& g, const NetworkWeights& w);
// Throws WeightError naming the first layer whose manifest line or record
// does not match `g`.
NetworkWeights load_weights(const std::string& path, const ModuleGraph& g);
// Same check for weights already in memory.
void check_weights(const ModuleGraph& g, const NetworkWeights& w);

enum class ConvImpl { kLowered, kDirect };

struct ForwardOptions {
  ConvImpl conv = ConvImpl::kLowered;
  // Tallies MACs and pool window elements; forces the direct convolution.
  OpCounter* counter = nullptr;
  // Called before each layer runs, with that layer's inputs.
  std::function<void(const LayerSpec&, std::span<const Tensor5D* const>)> before_layer;
};

// Runs the graph and returns the output of its last layer. Intermediate
// activations are released as soon as their last consumer has run.
Tensor5D forward(const ModuleGraph& g, const NetworkWeights& w, const Tensor5D& x, const ForwardOptions& opt = {});

// Every layer's outputs, indexed like g.layers (split layers have several).
std::vector<std::vector<Tensor5D>> forward_all(const ModuleGraph& g, const NetworkWeights& w, const Tensor5D& x,
                                               const ForwardOptions& opt = {});

// Per-sample class scores: the channel vector of a (n, classes, t, h, w)
// probability tensor averaged over all remaining positions.
std::vector<std::vector<float>> average_positions(const Tensor5D& probs);

}  // namespace lw3d
