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
#include <string>
#include <utility>
#include <vector>

#include "lw3d/tensor.hpp"
#include "lw3d/train.hpp"

namespace lw3d {

enum class Stream { kRgb, kDepth };
std::string to_string(Stream s);
Stream parse_stream(const std::string& s);

struct ClipRecord {
  std::string path;
  std::size_t label = 0;
  Stream stream = Stream::kRgb;
  std::string source;
};

struct AugmentConfig {
  std::size_t resize_h = 256;
  std::size_t resize_w = 310;
  std::size_t crop = 224;
  std::size_t clip_length = 32;
  double flip_prob = 0.5;

  void validate() const;
};

// Start frame of the window sample_clip takes (0 when the video is shorter
// than `length`).
std::size_t clip_start(std::size_t frames, std::size_t length, std::uint64_t seed);
// Uniform contiguous window of `length` frames, or cyclic tiling when the
// video is shorter.
Tensor5D sample_clip(const Tensor5D& video, std::size_t length, std::uint64_t seed);

// Per-frame bilinear resize, half-pixel centers, edge clamped.
Tensor5D resize_bilinear(const Tensor5D& clip, std::size_t h, std::size_t w);

enum class CropSite { kTopLeft, kTopRight, kBottomLeft, kBottomRight, kCenter };
// (row, col) of the crop's top-left corner.
std::pair<std::size_t, std::size_t> crop_origin(std::size_t h, std::size_t w, std::size_t crop, CropSite site);
Tensor5D crop_spatial(const Tensor5D& clip, std::size_t top, std::size_t left, std::size_t size);
Tensor5D flip_horizontal(const Tensor5D& clip);

// Resize, crop at one of five sites chosen uniformly, then flip with
// probability flip_prob. Deterministic in `seed`.
Tensor5D augment(const Tensor5D& clip, const AugmentConfig& cfg, std::uint64_t seed);

// Mixes a global seed with a record index.
std::uint64_t record_seed(std::uint64_t seed, std::uint64_t index);

struct SynthConfig {
  std::size_t classes = 2;
  std::size_t clips_per_class = 8;
  Shape5 shape{1, 3, 8, 32, 32};  // per clip; c is ignored for depth (always 1)
  Stream stream = Stream::kRgb;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

// Class k: a blob drifting vertically (direction by parity) inside a
// class-specific band, with class-specific flicker frequency, plus noise.
// Labels are balanced and interleaved. Patterns are mirror symmetric, so
// horizontal flips keep labels valid.
std::vector<Sample> synth_samples(const SynthConfig& cfg);

struct SynthDataset {
  std::vector<ClipRecord> records;
  double sanity_accuracy = 0;  // nearest-centroid accuracy on mean-frame features
};

// Writes one tensor file per clip plus manifest.tsv into `dir`.
SynthDataset synth_dataset(const SynthConfig& cfg, const std::string& dir);

// Nearest class centroid on time-averaged frames, scored on the same set.
double mean_frame_centroid_accuracy(const std::vector<Sample>& samples, std::size_t classes);

// Tab-separated manifest: path, label, stream, source id.
void write_manifest(const std::string& path, const std::vector<ClipRecord>& records);
// Relative paths are resolved against the manifest's directory.
std::vector<ClipRecord> read_manifest(const std::string& path);

// Loads a record's tensor; single-channel depth clips are replicated to 3
// channels.
Tensor5D load_clip(const ClipRecord& r);

}  // namespace lw3d
