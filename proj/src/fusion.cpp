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

#include "lw3d/fusion.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lw3d/tensor.hpp"

namespace lw3d {

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_number(const std::string& cell, const std::string& path, std::size_t row) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw FormatError(path + ": row " + std::to_string(row + 1) + ": bad number '" + cell + "'");
  }
  return v;
}

}  // namespace

FusionStrategy parse_strategy(const std::string& s) {
  if (s == "ms1") return FusionStrategy::kMS1;
  if (s == "ms2") return FusionStrategy::kMS2;
  throw std::invalid_argument("unknown strategy '" + s + "' (expected ms1|ms2)");
}

double tanh_weight(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("accuracy must lie in [0, 1]");
  return a >= 0.5 ? std::tanh(a * a) : 0.0;
}

ScoreVector merge(const ScoreVector& a, const ScoreVector& b, FusionStrategy strategy, double acc_a, double acc_b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("class count mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  double wa = 0.5, wb = 0.5;
  if (strategy == FusionStrategy::kMS2) {
    wa = tanh_weight(acc_a);
    wb = tanh_weight(acc_b);
    if (wa == 0.0 && wb == 0.0) throw std::invalid_argument("both stream accuracies are below the 0.5 gate");
  }
  ScoreVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

std::size_t argmax(const ScoreVector& s) {
  if (s.empty()) throw std::invalid_argument("empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return best;
}

double evaluate_accuracy(const std::vector<ScoreVector>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.empty()) throw std::invalid_argument("no predictions");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument(std::to_string(predictions.size()) + " predictions but " +
                                std::to_string(labels.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += argmax(predictions[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::vector<ScoreVector> read_scores_csv(const std::string& path) {
  std::vector<ScoreVector> out;
  const auto rows = read_csv(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ScoreVector v;
    for (const std::string& cell : rows[r]) v.push_back(parse_number(cell, path, r));
    if (!out.empty() && v.size() != out.front().size()) {
      throw FormatError(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(v.size()) +
                        " columns, expected " + std::to_string(out.front().size()));
    }
    out.push_back(std::move(v));
  }
  return out;
}

void write_scores_csv(std::ostream& os, const std::vector<ScoreVector>& rows) {
  char buf[32];
  for (const ScoreVector& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", r[i]);
      os << (i ? "," : "") << buf;
    }
    os << "\n";
  }
}

std::vector<std::size_t> read_labels_csv(const std::string& path) {
  std::vector<std::size_t> out;
  const auto rows = read_csv(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = parse_number(rows[r].front(), path, r);
    if (v < 0 || v != std::floor(v)) throw FormatError(path + ": row " + std::to_string(r + 1) + ": bad label");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace lw3d
