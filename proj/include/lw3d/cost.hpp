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
#include <optional>
#include <string>
#include <vector>

#include "lw3d/graph.hpp"

namespace lw3d {

inline constexpr const char* kCostConvention =
    "MAC=1FLOP, pools counted at kernel-volume per output element, bn/relu/softmax/shuffle/split = 0";

struct CostOptions {
  // Adds 2*C (scale and shift) per batch-norm layer to the parameter count.
  bool include_bn_params = false;
  // One row per layer instead of one per group.
  bool per_layer = false;
};

// Cost of a single layer. FLOPs exclude the batch dimension.
struct LayerCost {
  std::string id;
  LayerKind kind = LayerKind::kInput;
  std::string group;
  std::string module;
  int stage = 0;
  Shape5 output{};
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

struct CostRow {
  std::string id;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  bool in_total = true;
};

// Display units: kNetwork prints M params / G FLOPs with 3 decimals,
// kModule prints K params / M FLOPs with 1 decimal.
enum class ReportScale { kNetwork, kModule };

struct CostReport {
  std::string title;
  ReportScale scale = ReportScale::kNetwork;
  std::vector<CostRow> rows;
  std::uint64_t total_params = 0;
  std::uint64_t total_flops = 0;
  std::string convention = kCostConvention;
  std::vector<std::string> notes;

  // Row by id; nullptr when missing.
  const CostRow* find(const std::string& id) const;
};

std::vector<LayerCost> layer_costs(const ModuleGraph& g, const CostOptions& opt = {});

// Group rows in first-appearance order (Conv1, Max-p1, ..., Avg-p, Classifier).
// The classifier row is reported but excluded from the totals.
CostReport analyze_costs(const ModuleGraph& g, const CostOptions& opt = {});
// Same rows with only the parameter (resp. FLOP) column populated.
CostReport count_params(const ModuleGraph& g, const CostOptions& opt = {});
CostReport count_flops(const ModuleGraph& g, const CostOptions& opt = {});

// Stage-one / stage-two breakdown of a single module graph (see
// build_inception_module). For the canonical 4b configuration the published
// reference figures and the relative gap are attached as notes.
CostReport module_report(const ModuleGraph& g, const std::string& module, const CostOptions& opt = {});

struct PublishedModuleCost {
  double params_k = 0;
  double flops_m = 0;
};
// Published 4b totals per variant (thousands of params, millions of FLOPs).
PublishedModuleCost published_4b(Arch variant);

struct FactorizationCandidate {
  std::string label;
  std::vector<Conv3DSpec> layers;
  std::vector<std::uint64_t> layer_params;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

struct FactorizationComparison {
  std::vector<FactorizationCandidate> candidates;
  std::size_t best = 0;  // index of the minimum-parameter candidate (earliest on ties)
};

// Full k*k*k convolution versus the four two-layer factorizations, all
// stride 1 with same padding over `sites` output positions. For k == 1 there
// is nothing to factorize and every candidate is the single pointwise layer.
FactorizationComparison compare_factorizations(std::size_t in_channels, std::size_t out_channels, std::size_t k,
                                               const Extent3& sites);

// Deterministic text rendering: "table", "csv" or "json". Throws
// std::invalid_argument on any other format.
std::string emit_report(const CostReport& r, const std::string& format);
std::string emit_factorizations(const FactorizationComparison& c, const std::string& format);

// Scaled display value, e.g. format_scaled(66048, 1e6, 3) == "0.066".
std::string format_scaled(std::uint64_t value, double divisor, int decimals);

}  // namespace lw3d
