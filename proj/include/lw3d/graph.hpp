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

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lw3d/nn_ops.hpp"
#include "lw3d/tensor.hpp"

namespace lw3d {

// The four network families. Arch::kI3D builds plain Inc. modules.
enum class Arch { kI3D, kIST, kSST, kGSST };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& name);

enum class LayerKind { kInput, kConv, kPool, kBatchNorm, kRelu, kShuffle, kSplit, kConcat, kSoftmax };

std::string to_string(LayerKind kind);

struct InputParams {
  Shape5 shape{};
};
struct BatchNormSpec {
  std::size_t channels = 0;
};
struct ShuffleSpec {
  std::size_t groups = 1;
};
struct SplitSpec {
  std::vector<std::size_t> sizes;
};
struct NoParams {};

using LayerParams = std::variant<NoParams, InputParams, Conv3DSpec, PoolSpec, BatchNormSpec, ShuffleSpec, SplitSpec>;

// Reference to one output of a layer. Only split layers have more than one.
struct PortRef {
  std::string layer;
  std::size_t port = 0;
  friend bool operator==(const PortRef&, const PortRef&) = default;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::kInput;
  LayerParams params{};
  std::vector<PortRef> inputs;
  std::string group;   // cost-report row, e.g. "Conv1" or "MG4"
  std::string module;  // inception module name ("4b"), empty elsewhere
  int stage = 0;       // 1 or 2 inside a module, 0 elsewhere

  std::size_t num_outputs() const;
  const Conv3DSpec& conv() const { return std::get<Conv3DSpec>(params); }
  const PoolSpec& pool() const { return std::get<PoolSpec>(params); }
};

// A network (or a single module fragment) as a DAG of layers in topological order.
struct ModuleGraph {
  Arch arch = Arch::kI3D;
  Shape5 input_shape{};
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;
  // Builder remarks, e.g. shuffle-group fallbacks.
  std::vector<std::string> notes;

  // Throws std::invalid_argument on duplicate ids, forward references,
  // bad port numbers or wrong arity.
  void validate() const;
  const LayerSpec& layer(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::size_t count(LayerKind kind) const;
};

// Branch widths of one inception-style module.
struct InceptionWidths {
  std::size_t b1 = 0;
  std::size_t b2_reduce = 0;
  std::size_t b2_out = 0;
  std::size_t b3_reduce = 0;
  std::size_t b3_out = 0;
  std::size_t b4_proj = 0;

  std::size_t out_channels() const { return b1 + b2_out + b3_out + b4_proj; }
  // Branch capacities used for channel splitting: final width of each path.
  std::array<std::size_t, 4> capacities() const { return {b1, b2_out, b3_out, b4_proj}; }
  void validate() const;
  friend bool operator==(const InceptionWidths&, const InceptionWidths&) = default;
};

struct NamedWidths {
  std::string name;
  InceptionWidths widths;
};

// Module names 3b..5c with their canonical branch widths.
const std::array<NamedWidths, 9>& canonical_widths();

struct SplitAllocation {
  std::size_t group_count = 0;
  std::array<std::size_t, 4> groups_per_path{};
  std::array<std::size_t, 4> channels_per_path{};
};

// Largest-remainder rounding of N*C_i/sum(C) in units of `quantum` groups.
// Ties go to the later path; every path receives at least one unit. When
// in_channels is nonzero, channels_per_path is filled as groups*(in/N).
SplitAllocation allocate_groups(std::size_t group_count, const std::array<std::size_t, 4>& capacities,
                                std::size_t in_channels = 0, std::size_t quantum = 1);

struct BuildOptions {
  double width_mult = 1.0;
  std::size_t shuffle_groups = 16;
  // Group count of every GSST grouped convolution.
  std::size_t conv_groups = 2;
  std::map<std::string, InceptionWidths> width_overrides;
};

// Scales a layer width by the multiplier; non-unit multipliers round to an
// even count of at least 2 so grouped layers stay valid.
std::size_t scale_width(std::size_t width, double mult);

// Shuffle group count for a module with `in_channels` inputs: `preferred`
// when it divides, otherwise the largest divisor in [4, preferred]. `quantum`
// is the split granularity; the chosen N must be a multiple of it.
std::size_t choose_shuffle_groups(std::size_t in_channels, std::size_t preferred, std::size_t quantum = 1);

// One module as a standalone graph whose first layer is an input of shape `input`.
ModuleGraph build_inception_module(const InceptionWidths& widths, Arch variant, const Shape5& input,
                                   const std::string& name = "4b", const BuildOptions& options = {});

ModuleGraph build_network(Arch arch, const Shape5& input_shape, std::size_t num_classes,
                          const BuildOptions& options = {});

// Module `name` of the network above, rebuilt as a standalone graph on the
// activation shape it sees inside the network.
ModuleGraph extract_module(Arch arch, const Shape5& input_shape, std::size_t num_classes, const std::string& name,
                           const BuildOptions& options = {});

// layer id -> output shapes (one per port). Throws ShapeError naming the
// first inconsistent layer.
using ShapeMap = std::map<std::string, std::vector<Shape5>>;
ShapeMap infer_shapes(const ModuleGraph& g);

// The convolution feeding the final softmax.
const LayerSpec& classifier_layer(const ModuleGraph& g);

// Canonical manifest: parameterized layers in topological order, one per line.
// This order is also the weight-file record order.
std::string manifest_text(const ModuleGraph& g);

}  // namespace lw3d
