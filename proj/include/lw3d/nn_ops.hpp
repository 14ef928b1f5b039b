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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lw3d/tensor.hpp"

namespace lw3d {

// (temporal, height, width) triple used for kernels, strides and padding.
struct Extent3 {
  std::size_t t = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t volume() const { return t * h * w; }
  std::string str() const;
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

// Bias-free 3D convolution. Weights have dims (out, in/groups, kt, kh, kw) and
// are stored as a Tensor5D with exactly those extents.
struct Conv3DSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent3 kernel{};
  Extent3 stride{};
  Extent3 padding{0, 0, 0};
  std::size_t groups = 1;

  void validate() const;
  std::size_t param_count() const;
  Shape5 weight_shape() const;
  // Output shape for input x; throws ShapeError on channel mismatch or a
  // non-positive output extent.
  Shape5 output_shape(const Shape5& x) const;
  friend bool operator==(const Conv3DSpec&, const Conv3DSpec&) = default;
};

enum class PoolKind { kMax, kAverage };

struct PoolSpec {
  PoolKind kind = PoolKind::kMax;
  Extent3 kernel{};
  Extent3 stride{};
  Extent3 padding{0, 0, 0};

  Shape5 output_shape(const Shape5& x) const;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

// Inference-mode batch normalization: y = gamma * (x - mean) / sqrt(var + eps) + beta.
struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> var;
  float eps = 1e-5f;

  static BatchNormParams identity(std::size_t channels, float eps = 1e-5f);
  std::size_t channels() const { return gamma.size(); }
  void validate() const;
};

// Optional multiply-accumulate / window-element tally. Padded taps count,
// so totals match the analytic cost model.
struct OpCounter {
  std::uint64_t macs = 0;
  std::uint64_t pool_ops = 0;
};

// Output extent along one axis; throws ShapeError when it would be < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// Reference convolution: nested loops, 64-bit accumulation per output element.
Tensor5D conv3d_direct(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w,
                       OpCounter* counter = nullptr);

// Patch-matrix lowering followed by a blocked matrix multiply. Same contract
// as conv3d_direct; this is the path the network executor uses.
Tensor5D conv3d_lowered(const Tensor5D& x, const Conv3DSpec& spec, const Tensor5D& w);

// Reshape-transpose permutation: channel i*(C/g)+j moves to j*g+i.
Tensor5D channel_shuffle(const Tensor5D& x, std::size_t groups);
// Destination channel of source channel `c` under channel_shuffle(groups).
std::size_t shuffle_destination(std::size_t c, std::size_t channels, std::size_t groups);

// Max pooling pads with -inf; average pooling pads with zeros and always
// divides by the full kernel volume.
Tensor5D pool3d(const Tensor5D& x, const PoolSpec& spec, OpCounter* counter = nullptr);

Tensor5D batchnorm_infer(const Tensor5D& x, const BatchNormParams& p);

// Softmax across channels at every (n,t,h,w) site, max-subtracted.
Tensor5D softmax_channels(const Tensor5D& x);

// kGlorot: uniform in +-sqrt(6/(fan_in+fan_out)), the reproducible test init.
// kHe: uniform in +-sqrt(6/fan_in), which keeps activation scale through
// ReLU stacks and is what training starts from.
enum class InitScheme { kGlorot, kHe };

Tensor5D init_conv_weights(const Conv3DSpec& spec, std::uint64_t seed, InitScheme scheme = InitScheme::kGlorot);

}  // namespace lw3d
