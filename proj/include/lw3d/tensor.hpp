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
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lw3d {

// Thrown when tensor shapes violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a serialized tensor or weight file cannot be decoded.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extents of a rank-5 video tensor: batch, channel, time, height, width.
struct Shape5 {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t t = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  bool valid() const { return n >= 1 && c >= 1 && t >= 1 && h >= 1 && w >= 1; }

  // Throws ShapeError when the product overflows size_t or a dim is zero.
  std::size_t numel() const;

  // Elements per (t,h,w) site, i.e. t*h*w.
  std::size_t sites() const { return t * h * w; }

  std::string str() const;

  friend bool operator==(const Shape5&, const Shape5&) = default;
};

std::ostream& operator<<(std::ostream& os, const Shape5& s);

// Parses "CxTxHxW" (batch 1) or "NxCxTxHxW".
Shape5 parse_shape(const std::string& text);

// Dense NCTHW float tensor. Layout is fixed row-major with w fastest; element
// (n,c,t,h,w) lives at ((((n*C+c)*T+t)*H+h)*W+w).
class Tensor5D {
 public:
  Tensor5D() = default;
  explicit Tensor5D(const Shape5& shape);
  Tensor5D(const Shape5& shape, std::vector<float> data);

  const Shape5& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t t, std::size_t h,
                    std::size_t w) const {
    return (((n * shape_.c + c) * shape_.t + t) * shape_.h + h) * shape_.w + w;
  }

  float& at(std::size_t n, std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return data_[index(n, c, t, h, w)];
  }
  float at(std::size_t n, std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return data_[index(n, c, t, h, w)];
  }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the first element of the (n, c) channel plane (t*h*w floats).
  float* channel(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.sites(); }
  const float* channel(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.sites();
  }

  void fill(float v);

  friend bool operator==(const Tensor5D& a, const Tensor5D& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape5 shape_{};
  std::vector<float> data_;
};

Tensor5D zeros(const Shape5& shape);
Tensor5D full(const Shape5& shape, float value);

// Concatenates along the channel axis; part k occupies a contiguous channel block.
Tensor5D concat_channels(std::span<const Tensor5D> parts);

// Inverse of concat_channels. sizes must be positive and sum to x.c.
std::vector<Tensor5D> split_channels(const Tensor5D& x, std::span<const std::size_t> sizes);

Tensor5D map_elementwise(const Tensor5D& x, const std::function<float(float)>& f);
Tensor5D relu(const Tensor5D& x);

// Elementwise helpers; shapes must match exactly (no broadcasting).
Tensor5D add(const Tensor5D& a, const Tensor5D& b);
void add_inplace(Tensor5D& acc, const Tensor5D& b);
float max_abs_diff(const Tensor5D& a, const Tensor5D& b);

// Binary tensor file: "LW3D", version 0x01, five u64 LE dims (n,c,t,h,w),
// then little-endian float32 payload in layout order.
void write_tensor(std::ostream& os, const Tensor5D& x);
Tensor5D read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor5D& x);
Tensor5D load_tensor(const std::string& path);

}  // namespace lw3d
