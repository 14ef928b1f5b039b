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

#include <string>
#include <vector>

namespace lw3d {

using ScoreVector = std::vector<double>;

enum class FusionStrategy { kMS1, kMS2 };
FusionStrategy parse_strategy(const std::string& s);

// Gated weight: tanh(a^2) for a >= 0.5, else 0. Throws for a outside [0, 1].
double tanh_weight(double accuracy);

// MS1: (a + b) / 2. MS2: w_a * a + w_b * b with unnormalized gated weights;
// throws when both weights are zero.
ScoreVector merge(const ScoreVector& a, const ScoreVector& b, FusionStrategy strategy, double acc_a = 0,
                  double acc_b = 0);

// Index of the largest score, lowest index on ties.
std::size_t argmax(const ScoreVector& s);

double evaluate_accuracy(const std::vector<ScoreVector>& predictions, const std::vector<std::size_t>& labels);

// One row per clip, one column per class.
std::vector<ScoreVector> read_scores_csv(const std::string& path);
void write_scores_csv(std::ostream& os, const std::vector<ScoreVector>& rows);
// One label per row (first column).
std::vector<std::size_t> read_labels_csv(const std::string& path);

}  // namespace lw3d
