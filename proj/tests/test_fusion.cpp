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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lw3d/fusion.hpp"
#include "lw3d/rng.hpp"
#include "lw3d/tensor.hpp"

using namespace lw3d;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("lw3d_test_fusion_" + name);
  std::ofstream(p) << text;
  return p;
}

ScoreVector random_scores(Rng& rng, std::size_t n) {
  ScoreVector s(n);
  for (double& v : s) v = rng.uniform(0, 1);
  return s;
}

}  // namespace

TEST_CASE("gated tanh weight") {
  // tanh(1) and tanh(0.25), computed independently.
  CHECK(tanh_weight(1.0) == doctest::Approx(0.7615941559557649).epsilon(1e-12));
  CHECK(tanh_weight(0.5) == doctest::Approx(0.24491866240370913).epsilon(1e-12));
  CHECK(tanh_weight(0.4) == 0.0);
  CHECK(tanh_weight(0.0) == 0.0);
  CHECK(tanh_weight(0.4999999) == 0.0);
  CHECK(std::abs(tanh_weight(1.0) - 0.761594) <= 1e-6);
  CHECK(std::abs(tanh_weight(0.5) - 0.244919) <= 1e-6);

  double prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double w = tanh_weight(i / 1000.0);
    CHECK(w >= prev);
    prev = w;
  }
  CHECK_THROWS(tanh_weight(-0.01));
  CHECK_THROWS(tanh_weight(1.01));
  CHECK_THROWS(tanh_weight(std::nan("")));
}

TEST_CASE("MS1 averages") {
  const ScoreVector m = merge({1, 0}, {0, 1}, FusionStrategy::kMS1);
  CHECK(m == ScoreVector{0.5, 0.5});
  const ScoreVector same{0.1, 0.7, 0.2};
  CHECK(merge(same, same, FusionStrategy::kMS1) == same);
}

TEST_CASE("MS2 uses unnormalized gated weights") {
  const ScoreVector a{0.2, 0.8}, b{0.6, 0.4};
  const ScoreVector m = merge(a, b, FusionStrategy::kMS2, 0.908, 0.894);
  const double wa = std::tanh(0.908 * 0.908), wb = std::tanh(0.894 * 0.894);
  CHECK(m[0] == doctest::Approx(wa * 0.2 + wb * 0.6));
  CHECK(m[1] == doctest::Approx(wa * 0.8 + wb * 0.4));

  // Swapping streams together with their accuracies changes nothing.
  CHECK(merge(b, a, FusionStrategy::kMS2, 0.894, 0.908) == m);
  CHECK_THROWS(merge(a, b, FusionStrategy::kMS2, 0.3, 0.2));
  CHECK_THROWS(merge(a, {1, 2, 3}, FusionStrategy::kMS1));
}

TEST_CASE("MS2 with one stream gated follows the other stream") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + rng.below(59);
    const ScoreVector a = random_scores(rng, classes), b = random_scores(rng, classes);
    const double open = rng.uniform(0.5, 1.0), closed = rng.uniform(0.0, 0.4999);
    CHECK(argmax(merge(a, b, FusionStrategy::kMS2, open, closed)) == argmax(a));
    CHECK(argmax(merge(a, b, FusionStrategy::kMS2, closed, open)) == argmax(b));
  }
}

TEST_CASE("argmax and accuracy") {
  CHECK(argmax({0.1, 0.5, 0.5}) == 1);
  CHECK(argmax({3}) == 0);
  CHECK_THROWS(argmax({}));
  const std::vector<ScoreVector> p{{1, 0}, {0, 1}, {1, 0}, {0.2, 0.8}};
  CHECK(evaluate_accuracy(p, {0, 1, 1, 1}) == 0.75);
  CHECK_THROWS(evaluate_accuracy(p, {0, 1}));
  CHECK_THROWS(evaluate_accuracy({}, {}));
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("ms1") == FusionStrategy::kMS1);
  CHECK(parse_strategy("ms2") == FusionStrategy::kMS2);
  CHECK_THROWS(parse_strategy("mean"));
}

TEST_CASE("score CSV round trip") {
  const std::vector<ScoreVector> rows{{0.125, 0.875, 1e-9}, {1.0 / 3, 2.0 / 3, 0}};
  std::ostringstream os;
  write_scores_csv(os, rows);
  const fs::path p = write_file("scores.csv", os.str());
  const auto back = read_scores_csv(p.string());
  REQUIRE(back.size() == 2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(back[r][c] == doctest::Approx(rows[r][c]).epsilon(1e-8));

  const auto crlf = read_scores_csv(write_file("crlf.csv", "0.5,0.5\r\n\r\n1,0\r\n").string());
  CHECK(crlf == std::vector<ScoreVector>{{0.5, 0.5}, {1, 0}});
  CHECK(read_labels_csv(write_file("labels.csv", "0\n2\n1,extra\n").string()) ==
        std::vector<std::size_t>{0, 2, 1});
}

TEST_CASE("malformed CSV is rejected") {
  CHECK_THROWS_AS(read_scores_csv(write_file("ragged.csv", "0.1,0.9\n0.5\n").string()), FormatError);
  CHECK_THROWS_AS(read_scores_csv(write_file("text.csv", "0.1,abc\n").string()), FormatError);
  CHECK_THROWS_AS(read_scores_csv(write_file("inf.csv", "0.1,inf\n").string()), FormatError);
  CHECK_THROWS_AS(read_labels_csv(write_file("frac.csv", "1.5\n").string()), FormatError);
  CHECK_THROWS_AS(read_labels_csv(write_file("neg.csv", "-1\n").string()), FormatError);
  CHECK_THROWS_AS(read_scores_csv("/nonexistent/scores.csv"), FormatError);
}
