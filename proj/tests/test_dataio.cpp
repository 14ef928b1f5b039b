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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include "lw3d/rng.hpp"
#include <set>

#include "lw3d/dataio.hpp"
#include "test_util.hpp"

using namespace lw3d;
using lw3d::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

// Frame t of channel c carries the value 1000*c + t everywhere.
Tensor5D frame_indexed(std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
  Tensor5D v({1, c, t, h, w});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) v.at(0, ci, ti, y, x) = static_cast<float>(1000 * ci + ti);
  return v;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lw3d_test_dataio_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("window start covers exactly [0, t - length]") {
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const std::size_t start = clip_start(40, 32, s);
    CHECK(start <= 8);
    seen.insert(start);
  }
  CHECK(seen.size() == 9);
  CHECK(clip_start(32, 32, 5) == 0);
  CHECK(clip_start(10, 32, 5) == 0);
}

TEST_CASE("contiguous window and identity") {
  const Tensor5D v = frame_indexed(2, 40, 3, 2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor5D c = sample_clip(v, 32, s);
    const std::size_t start = clip_start(40, 32, s);
    REQUIRE(c.shape() == Shape5{1, 2, 32, 3, 2});
    for (std::size_t ch = 0; ch < 2; ++ch)
      for (std::size_t t = 0; t < 32; ++t) CHECK(c.at(0, ch, t, 1, 1) == float(1000 * ch + start + t));
  }
  const Tensor5D same = frame_indexed(1, 32, 4, 4);
  CHECK(sample_clip(same, 32, 99) == same);
}

TEST_CASE("short videos tile cyclically") {
  const Tensor5D v = frame_indexed(1, 10, 2, 2);
  const Tensor5D c = sample_clip(v, 32, 3);
  REQUIRE(c.shape().t == 32);
  std::vector<float> frames;
  for (std::size_t t = 0; t < 32; ++t) frames.push_back(c.at(0, 0, t, 0, 0));
  std::vector<float> expect;
  for (int rep = 0; rep < 3; ++rep)
    for (int t = 0; t < 10; ++t) expect.push_back(float(t));
  expect.push_back(0);
  expect.push_back(1);
  CHECK(frames == expect);

  for (std::size_t t : {1u, 3u, 7u, 31u}) {
    for (std::size_t len : {1u, 5u, 32u, 64u}) {
      const Tensor5D out = sample_clip(frame_indexed(1, t, 1, 1), len, 11);
      REQUIRE(out.shape().t == len);
      if (t <= len)
        for (std::size_t i = 0; i < len; ++i) CHECK(out[i] == float(i % t));
    }
  }
  CHECK_THROWS(sample_clip(v, 0, 0));
}

TEST_CASE("crop sites") {
  CHECK(crop_origin(256, 310, 224, CropSite::kCenter) == std::pair<std::size_t, std::size_t>{16, 43});
  CHECK(crop_origin(256, 310, 224, CropSite::kTopLeft) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(crop_origin(256, 310, 224, CropSite::kTopRight) == std::pair<std::size_t, std::size_t>{0, 86});
  CHECK(crop_origin(256, 310, 224, CropSite::kBottomLeft) == std::pair<std::size_t, std::size_t>{32, 0});
  CHECK(crop_origin(256, 310, 224, CropSite::kBottomRight) == std::pair<std::size_t, std::size_t>{32, 86});
  CHECK_THROWS_AS(crop_origin(200, 310, 224, CropSite::kCenter), ShapeError);

  // Encode (row, col) in each pixel; the center crop spans rows 16..239, cols 43..266.
  Tensor5D f({1, 1, 1, 256, 310});
  for (std::size_t y = 0; y < 256; ++y)
    for (std::size_t x = 0; x < 310; ++x) f.at(0, 0, 0, y, x) = static_cast<float>(y * 1000 + x);
  const auto [top, left] = crop_origin(256, 310, 224, CropSite::kCenter);
  const Tensor5D c = crop_spatial(f, top, left, 224);
  CHECK(c.at(0, 0, 0, 0, 0) == 16 * 1000 + 43);
  CHECK(c.at(0, 0, 0, 223, 223) == 239 * 1000 + 266);
  CHECK_THROWS_AS(crop_spatial(f, 40, 0, 224), ShapeError);
}

TEST_CASE("flip is an involution and reverses width") {
  Rng rng(1);
  const Tensor5D x = random_tensor({2, 3, 4, 5, 7}, rng, -1, 1);
  const Tensor5D f = flip_horizontal(x);
  CHECK(flip_horizontal(f) == x);
  CHECK(f.at(1, 2, 3, 4, 0) == x.at(1, 2, 3, 4, 6));
  CHECK(f.at(0, 1, 2, 3, 2) == x.at(0, 1, 2, 3, 4));
}

TEST_CASE("bilinear resize") {
  // Constant frames stay constant; identity size is a no-op.
  const Tensor5D c = full({1, 2, 3, 5, 6}, 0.75f);
  const Tensor5D big = resize_bilinear(c, 9, 4);
  for (float v : big.data()) CHECK(v == doctest::Approx(0.75));
  Rng rng(2);
  const Tensor5D x = random_tensor({1, 2, 3, 5, 6}, rng, -1, 1);
  CHECK(max_abs_diff(resize_bilinear(x, 5, 6), x) <= 1e-6f);

  // Upsampling a horizontal ramp 0,1 to width 4 with half-pixel centers:
  // source coords -0.25, 0.25, 0.75, 1.25 clamp to 0, .25, .75, 1.
  Tensor5D r({1, 1, 1, 1, 2}, {0.f, 1.f});
  const Tensor5D up = resize_bilinear(r, 1, 4);
  CHECK(up[0] == doctest::Approx(0.0));
  CHECK(up[1] == doctest::Approx(0.25));
  CHECK(up[2] == doctest::Approx(0.75));
  CHECK(up[3] == doctest::Approx(1.0));

  // Frames are resized independently.
  const Tensor5D fi = frame_indexed(1, 4, 3, 3);
  const Tensor5D rs = resize_bilinear(fi, 7, 5);
  for (std::size_t t = 0; t < 4; ++t) CHECK(rs.at(0, 0, t, 3, 2) == doctest::Approx(double(t)));
}

TEST_CASE("augment keeps channels and length and is seeded") {
  AugmentConfig cfg;
  cfg.resize_h = 20;
  cfg.resize_w = 24;
  cfg.crop = 16;
  Rng rng(3);
  const Tensor5D x = random_tensor({1, 3, 6, 18, 22}, rng, 0, 1);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Tensor5D a = augment(x, cfg, s);
    CHECK(a.shape() == Shape5{1, 3, 6, 16, 16});
    CHECK(augment(x, cfg, s) == a);
  }
  CHECK_FALSE(augment(x, cfg, 1) == augment(x, cfg, 2));

  // Without resizing, crop and flip only move values around.
  AugmentConfig exact = cfg;
  exact.resize_h = 18;
  exact.resize_w = 22;
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Tensor5D a = augment(x, exact, s);
    for (float v : a.data()) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
      CHECK(std::find(x.data().begin(), x.data().end(), v) != x.data().end());
    }
  }

  AugmentConfig bad = cfg;
  bad.crop = 30;
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(augment(x, bad, 0));
  AugmentConfig zero_len = cfg;
  zero_len.clip_length = 0;
  CHECK_THROWS(zero_len.validate());
}

TEST_CASE("augment uses all five sites and both flip states") {
  AugmentConfig cfg;
  cfg.resize_h = 4;
  cfg.resize_w = 4;
  cfg.crop = 2;
  Tensor5D x({1, 1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<float>(i);
  std::set<std::vector<float>> outcomes;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const Tensor5D a = augment(x, cfg, s);
    outcomes.insert(std::vector<float>(a.data().begin(), a.data().end()));
  }
  CHECK(outcomes.size() == 10);
}

TEST_CASE("record seeds differ per index") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(record_seed(42, i));
  CHECK(seeds.size() == 1000);
  CHECK(record_seed(42, 7) == record_seed(42, 7));
  CHECK(record_seed(42, 7) != record_seed(43, 7));
}

TEST_CASE("synthetic samples") {
  SynthConfig cfg;
  cfg.clips_per_class = 8;
  const auto s = synth_samples(cfg);
  REQUIRE(s.size() == 16);
  std::size_t ones = 0;
  for (const auto& x : s) {
    CHECK(x.clip.shape() == Shape5{1, 3, 8, 32, 32});
    ones += x.label;
  }
  CHECK(ones == 8);
  CHECK(mean_frame_centroid_accuracy(s, 2) > 0.5);

  const auto again = synth_samples(cfg);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(again[i].clip == s[i].clip);
  cfg.seed = 1;
  CHECK_FALSE(synth_samples(cfg)[0].clip == s[0].clip);

  SynthConfig four;
  four.classes = 4;
  four.clips_per_class = 3;
  four.stream = Stream::kDepth;
  const auto d = synth_samples(four);
  REQUIRE(d.size() == 12);
  std::vector<std::size_t> counts(4);
  for (const auto& x : d) {
    CHECK(x.clip.shape().c == 1);
    ++counts.at(x.label);
  }
  CHECK(counts == std::vector<std::size_t>{3, 3, 3, 3});

  SynthConfig one;
  one.classes = 1;
  CHECK_THROWS(synth_samples(one));
}

TEST_CASE("synthetic dataset on disk") {
  SynthConfig cfg;
  cfg.clips_per_class = 8;
  cfg.seed = 9;
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  const SynthDataset da = synth_dataset(cfg, a.string());
  const SynthDataset db = synth_dataset(cfg, b.string());
  REQUIRE(da.records.size() == 16);
  CHECK(da.sanity_accuracy > 0.5);
  CHECK(da.sanity_accuracy == db.sanity_accuracy);
  std::size_t ones = 0;
  for (const auto& r : da.records) ones += r.label;
  CHECK(ones == 8);

  for (const auto& e : fs::directory_iterator(a)) {
    CAPTURE(e.path().string());
    CHECK(file_bytes(e.path()) == file_bytes(b / e.path().filename()));
  }

  const auto recs = read_manifest((a / "manifest.tsv").string());
  REQUIRE(recs.size() == 16);
  const auto samples = synth_samples(cfg);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].label == samples[i].label);
    CHECK(load_clip(recs[i]) == samples[i].clip);
  }
}

TEST_CASE("manifest round trip and errors") {
  const fs::path d = fresh_dir("manifest");
  const Tensor5D depth = frame_indexed(1, 2, 2, 2);
  save_tensor((d / "d0.lw3d").string(), depth);
  const std::vector<ClipRecord> recs{{"d0.lw3d", 3, Stream::kDepth, "subject1"},
                                     {(d / "d0.lw3d").string(), 0, Stream::kRgb, "s2"}};
  write_manifest((d / "m.tsv").string(), recs);
  const auto back = read_manifest((d / "m.tsv").string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == 3);
  CHECK(back[0].stream == Stream::kDepth);
  CHECK(back[0].source == "subject1");
  CHECK(back[1].stream == Stream::kRgb);

  // Depth clips are replicated to three channels at load.
  const Tensor5D loaded = load_clip(back[0]);
  REQUIRE(loaded.shape() == Shape5{1, 3, 2, 2, 2});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 8; ++i) CHECK(loaded.channel(0, c)[i] == depth[i]);

  {
    std::ofstream bad(d / "bad.tsv");
    bad << "d0.lw3d\tnotanumber\trgb\tx\n";
  }
  CHECK_THROWS(read_manifest((d / "bad.tsv").string()));
  {
    std::ofstream bad(d / "bad2.tsv");
    bad << "d0.lw3d\t1\tinfrared\tx\n";
  }
  CHECK_THROWS(read_manifest((d / "bad2.tsv").string()));
  CHECK_THROWS(read_manifest((d / "missing.tsv").string()));
  CHECK_THROWS(load_clip({(d / "nope.lw3d").string(), 0, Stream::kRgb, ""}));
  CHECK(parse_stream("depth") == Stream::kDepth);
  CHECK(to_string(Stream::kRgb) == "rgb");
}
