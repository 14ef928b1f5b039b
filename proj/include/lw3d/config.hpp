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

#include <stdexcept>
#include <string>

#include "lw3d/graph.hpp"

namespace lw3d {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Declarative network description, as YAML:
//
//   arch: gsst               # i3d | ist | sst | gsst
//   input: 3x8x32x32         # CxTxHxW
//   classes: 2
//   width_mult: 0.125        # optional
//   shuffle_groups: 16       # optional
//   conv_groups: 2           # optional
//   widths:                  # optional; b1, b2 reduce, b2 out, b3 reduce, b3 out, b4 proj
//     4b: [192, 96, 208, 16, 48, 64]
struct ModelConfig {
  Arch arch = Arch::kI3D;
  Shape5 input{1, 3, 32, 224, 224};
  std::size_t classes = 60;
  BuildOptions build;

  ModuleGraph build_graph() const { return build_network(arch, input, classes, build); }
};

ModelConfig parse_model_config(const std::string& yaml_text);
ModelConfig load_model_config(const std::string& path);
std::string dump_model_config(const ModelConfig& cfg);

}  // namespace lw3d
