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

#include "lw3d/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace lw3d {

namespace {

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw ShapeError("tensor element count overflows");
  }
  return a * b;
}

void require_same_shape(const Tensor5D& a, const Tensor5D& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

constexpr std::array<char, 4> kMagic = {'L', 'W', '3', 'D'};
constexpr unsigned char kVersion = 0x01;

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw FormatError("truncated tensor header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

std::size_t Shape5::numel() const {
  if (!valid()) throw ShapeError("all tensor dims must be >= 1, got " + str());
  return checked_mul(checked_mul(checked_mul(checked_mul(n, c), t), h), w);
}

std::string Shape5::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << t << "," << h << "," << w << ")";
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape5& s) { return os << s.str(); }

Shape5 parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find_first_of("xX", pos);
    const std::string tok = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("malformed shape '" + text + "', expected CxTxHxW");
    }
    dims.push_back(std::stoull(tok));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  Shape5 s;
  if (dims.size() == 4) {
    s = {1, dims[0], dims[1], dims[2], dims[3]};
  } else if (dims.size() == 5) {
    s = {dims[0], dims[1], dims[2], dims[3], dims[4]};
  } else {
    throw std::invalid_argument("malformed shape '" + text + "', expected CxTxHxW");
  }
  if (!s.valid()) throw std::invalid_argument("shape '" + text + "' has a zero dimension");
  return s;
}

Tensor5D::Tensor5D(const Shape5& shape) : shape_(shape), data_(shape.numel(), 0.0f) {}

Tensor5D::Tensor5D(const Shape5& shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
  }
}

void Tensor5D::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor5D zeros(const Shape5& shape) { return Tensor5D(shape); }

Tensor5D full(const Shape5& shape, float value) {
  Tensor5D x(shape);
  x.fill(value);
  return x;
}

Tensor5D concat_channels(std::span<const Tensor5D> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  Shape5 out = parts.front().shape();
  out.c = 0;
  for (const auto& p : parts) {
    const Shape5& s = p.shape();
    if (s.n != out.n || s.t != out.t || s.h != out.h || s.w != out.w) {
      throw ShapeError("concat_channels: part " + s.str() + " disagrees with " + parts.front().shape().str());
    }
    out.c += s.c;
  }
  Tensor5D y(out);
  const std::size_t sites = out.sites();
  for (std::size_t n = 0; n < out.n; ++n) {
    float* dst = y.channel(n, 0);
    for (const auto& p : parts) {
      const std::size_t block = p.shape().c * sites;
      std::copy_n(p.channel(n, 0), block, dst);
      dst += block;
    }
  }
  return y;
}

std::vector<Tensor5D> split_channels(const Tensor5D& x, std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ShapeError("split_channels: zero-sized part");
    total += s;
  }
  if (total != x.shape().c) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but tensor has " +
                     std::to_string(x.shape().c) + " channels");
  }
  const Shape5& in = x.shape();
  const std::size_t sites = in.sites();
  std::vector<Tensor5D> parts;
  parts.reserve(sizes.size());
  std::size_t offset = 0;
  for (std::size_t s : sizes) {
    Shape5 ps = in;
    ps.c = s;
    Tensor5D p(ps);
    for (std::size_t n = 0; n < in.n; ++n) {
      std::copy_n(x.channel(n, offset), s * sites, p.channel(n, 0));
    }
    parts.push_back(std::move(p));
    offset += s;
  }
  return parts;
}

Tensor5D map_elementwise(const Tensor5D& x, const std::function<float(float)>& f) {
  Tensor5D y(x.shape());
  std::transform(x.data().begin(), x.data().end(), y.data().begin(), f);
  return y;
}

Tensor5D relu(const Tensor5D& x) {
  Tensor5D y(x.shape());
  const float* src = x.raw();
  float* dst = y.raw();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return y;
}

Tensor5D add(const Tensor5D& a, const Tensor5D& b) {
  Tensor5D y = a;
  add_inplace(y, b);
  return y;
}

void add_inplace(Tensor5D& acc, const Tensor5D& b) {
  require_same_shape(acc, b, "add");
  float* dst = acc.raw();
  const float* src = b.raw();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] += src[i];
}

float max_abs_diff(const Tensor5D& a, const Tensor5D& b) {
  require_same_shape(a, b, "max_abs_diff");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void write_tensor(std::ostream& os, const Tensor5D& x) {
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(kVersion));
  const Shape5& s = x.shape();
  for (std::uint64_t d : {s.n, s.c, s.t, s.h, s.w}) put_u64(os, d);
  std::vector<char> buf(x.size() * 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(x[i]);
    for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("failed writing tensor");
}

Tensor5D read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw FormatError("bad tensor magic (expected LW3D)");
  const int version = is.get();
  if (version != kVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  Shape5 s;
  s.n = get_u64(is);
  s.c = get_u64(is);
  s.t = get_u64(is);
  s.h = get_u64(is);
  s.w = get_u64(is);
  if (!s.valid()) throw FormatError("tensor header has a zero dimension");
  std::size_t count = 0;
  try {
    count = s.numel();
  } catch (const ShapeError& e) {
    throw FormatError(e.what());
  }
  std::vector<unsigned char> buf(count * 4);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw FormatError("truncated tensor payload for shape " + s.str());
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | buf[4 * i + b];
    data[i] = std::bit_cast<float>(bits);
  }
  return Tensor5D(s, std::move(data));
}

void save_tensor(const std::string& path, const Tensor5D& x) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_tensor(os, x);
}

Tensor5D load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open tensor file '" + path + "'");
  return read_tensor(is);
}

}  // namespace lw3d
