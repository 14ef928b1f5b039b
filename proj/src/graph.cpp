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

#include "lw3d/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lw3d {

namespace {

Extent3 ext(std::size_t t, std::size_t h, std::size_t w) { return {t, h, w}; }

Conv3DSpec make_conv(std::size_t in, std::size_t out, Extent3 kernel, Extent3 stride, Extent3 pad,
                     std::size_t groups = 1) {
  Conv3DSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = pad;
  s.groups = groups;
  return s;
}

PoolSpec make_pool(PoolKind kind, Extent3 kernel, Extent3 stride, Extent3 pad) {
  PoolSpec p;
  p.kind = kind;
  p.kernel = kernel;
  p.stride = stride;
  p.padding = pad;
  return p;
}

std::vector<Shape5> output_shapes(const LayerSpec& l, const std::vector<Shape5>& in) {
  auto one = [&](std::size_t arity) {
    if (in.size() != arity) {
      throw ShapeError("layer '" + l.id + "' expects " + std::to_string(arity) + " input(s), got " +
                       std::to_string(in.size()));
    }
  };
  switch (l.kind) {
    case LayerKind::kInput: {
      const Shape5 s = std::get<InputParams>(l.params).shape;
      if (!s.valid()) throw ShapeError("layer '" + l.id + "': invalid input shape " + s.str());
      return {s};
    }
    case LayerKind::kConv:
      one(1);
      return {l.conv().output_shape(in[0])};
    case LayerKind::kPool:
      one(1);
      return {l.pool().output_shape(in[0])};
    case LayerKind::kBatchNorm: {
      one(1);
      const std::size_t c = std::get<BatchNormSpec>(l.params).channels;
      if (c != in[0].c) {
        throw ShapeError("batchnorm over " + std::to_string(c) + " channels, input has " + std::to_string(in[0].c));
      }
      return {in[0]};
    }
    case LayerKind::kRelu:
    case LayerKind::kSoftmax:
      one(1);
      return {in[0]};
    case LayerKind::kShuffle: {
      one(1);
      const std::size_t g = std::get<ShuffleSpec>(l.params).groups;
      if (g == 0 || in[0].c % g != 0) {
        throw ShapeError(std::to_string(in[0].c) + " channels not divisible by " + std::to_string(g) + " groups");
      }
      return {in[0]};
    }
    case LayerKind::kSplit: {
      one(1);
      const auto& sizes = std::get<SplitSpec>(l.params).sizes;
      const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
      if (total != in[0].c || std::find(sizes.begin(), sizes.end(), 0u) != sizes.end()) {
        throw ShapeError("split sizes sum to " + std::to_string(total) + ", input has " + std::to_string(in[0].c));
      }
      std::vector<Shape5> out;
      for (std::size_t s : sizes) {
        Shape5 part = in[0];
        part.c = s;
        out.push_back(part);
      }
      return out;
    }
    case LayerKind::kConcat: {
      if (in.empty()) throw ShapeError("concat without inputs");
      Shape5 out = in[0];
      out.c = 0;
      for (const Shape5& s : in) {
        if (s.n != out.n || s.t != out.t || s.h != out.h || s.w != out.w) {
          throw ShapeError("concat parts disagree: " + in[0].str() + " vs " + s.str());
        }
        out.c += s.c;
      }
      return {out};
    }
  }
  throw ShapeError("unknown layer kind");
}

struct Tag {
  std::string group;
  std::string module{};
  int stage = 0;
};

// Incrementally assembles a graph while tracking shapes.
class GraphBuilder {
 public:
  GraphBuilder(Arch arch, const Shape5& input, std::size_t classes) {
    g_.arch = arch;
    g_.input_shape = input;
    g_.num_classes = classes;
  }

  PortRef input(const Shape5& shape) {
    LayerSpec l;
    l.id = "input";
    l.kind = LayerKind::kInput;
    l.params = InputParams{shape};
    l.group = "Input";
    return add(std::move(l));
  }

  PortRef conv_bn_relu(const std::string& id, const PortRef& in, const Conv3DSpec& spec, const Tag& tag) {
    PortRef x = conv(id, in, spec, tag);
    x = simple(id + "/bn", LayerKind::kBatchNorm, BatchNormSpec{spec.out_channels}, x, tag);
    return simple(id + "/relu", LayerKind::kRelu, NoParams{}, x, tag);
  }

  PortRef conv(const std::string& id, const PortRef& in, const Conv3DSpec& spec, const Tag& tag) {
    return simple(id, LayerKind::kConv, spec, in, tag);
  }

  PortRef pool(const std::string& id, const PortRef& in, const PoolSpec& spec, const Tag& tag) {
    return simple(id, LayerKind::kPool, spec, in, tag);
  }

  PortRef simple(const std::string& id, LayerKind kind, LayerParams params, const PortRef& in, const Tag& tag) {
    LayerSpec l;
    l.id = id;
    l.kind = kind;
    l.params = std::move(params);
    l.inputs = {in};
    apply(l, tag);
    return add(std::move(l));
  }

  std::vector<PortRef> split(const std::string& id, const PortRef& in, std::vector<std::size_t> sizes,
                             const Tag& tag) {
    LayerSpec l;
    l.id = id;
    l.kind = LayerKind::kSplit;
    l.params = SplitSpec{sizes};
    l.inputs = {in};
    apply(l, tag);
    const PortRef first = add(std::move(l));
    std::vector<PortRef> ports;
    for (std::size_t i = 0; i < sizes.size(); ++i) ports.push_back({first.layer, i});
    return ports;
  }

  PortRef concat(const std::string& id, std::vector<PortRef> parts, const Tag& tag) {
    LayerSpec l;
    l.id = id;
    l.kind = LayerKind::kConcat;
    l.params = NoParams{};
    l.inputs = std::move(parts);
    apply(l, tag);
    return add(std::move(l));
  }

  const Shape5& shape(const PortRef& p) const { return shapes_.at(p.layer).at(p.port); }
  void note(std::string text) { g_.notes.push_back(std::move(text)); }
  ModuleGraph finish() { return std::move(g_); }


 private:
  static void apply(LayerSpec& l, const Tag& tag) {
    l.group = tag.group;
    l.module = tag.module;
    l.stage = tag.stage;
  }

  PortRef add(LayerSpec l) {
    std::vector<Shape5> in;
    for (const auto& p : l.inputs) in.push_back(shape(p));
    try {
      shapes_[l.id] = output_shapes(l, in);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.id + "': " + e.what());
    }
    const std::string id = l.id;
    g_.layers.push_back(std::move(l));
    return {id, 0};
  }

  ModuleGraph g_;
  ShapeMap shapes_;
};

std::size_t gcd_size(std::size_t a, std::size_t b) { return std::gcd(a, b); }

PortRef add_inception_module(GraphBuilder& b, const std::string& name, const InceptionWidths& w, Arch variant,
                             const PortRef& in, const std::string& group, const BuildOptions& opt) {
  w.validate();
  const std::size_t cin = b.shape(in).c;
  const std::size_t g = variant == Arch::kGSST ? opt.conv_groups : 1;
  const Tag s1{group, name, 1};
  const Tag s2{group, name, 2};

  std::array<PortRef, 4> ins{in, in, in, in};
  std::array<std::size_t, 4> in_ch{cin, cin, cin, cin};
  if (variant == Arch::kSST || variant == Arch::kGSST) {
    const std::size_t N0 = opt.shuffle_groups;
    const std::size_t N = choose_shuffle_groups(cin, N0, 1);
    std::size_t per_group = cin / N;
    // Grouped branch convs need every slice divisible by conv_groups.
    std::size_t quantum = opt.conv_groups / gcd_size(per_group, opt.conv_groups);
    std::size_t chosen = N;
    if (quantum > 1) {
      chosen = choose_shuffle_groups(cin, N0, quantum);
      per_group = cin / chosen;
      quantum = opt.conv_groups / gcd_size(per_group, opt.conv_groups);
      b.note(name + ": split allocated in units of " + std::to_string(quantum) + " groups (" +
             std::to_string(per_group) + " channels per group, conv groups " + std::to_string(opt.conv_groups) +
             ")");
    }
    if (chosen != N0) {
      b.note(name + ": shuffle groups " + std::to_string(chosen) + " (" + std::to_string(cin) +
             " input channels not divisible by " + std::to_string(N0) + ")");
    }
    const SplitAllocation a = allocate_groups(chosen, w.capacities(), cin, quantum);
    const PortRef sh = b.simple(name + "/shuffle", LayerKind::kShuffle, ShuffleSpec{chosen}, in, Tag{group, name, 1});
    const auto parts = b.split(name + "/split", sh, {a.channels_per_path.begin(), a.channels_per_path.end()},
                               Tag{group, name, 1});
    for (std::size_t i = 0; i < 4; ++i) {
      ins[i] = parts[i];
      in_ch[i] = a.channels_per_path[i];
    }
  }

  const Extent3 one = ext(1, 1, 1);
  const Extent3 zero = ext(0, 0, 0);
  auto two_layer = [&](const std::string& branch, const PortRef& x, std::size_t reduce, std::size_t out) {
    if (variant == Arch::kI3D) {
      return b.conv_bn_relu(name + "/" + branch + "_3x3x3", x,
                            make_conv(reduce, out, ext(3, 3, 3), one, ext(1, 1, 1)), s2);
    }
    const PortRef sp = b.conv_bn_relu(name + "/" + branch + "_1x3x3", x,
                                      make_conv(reduce, reduce, ext(1, 3, 3), one, ext(0, 1, 1), g), s2);
    return b.conv_bn_relu(name + "/" + branch + "_3x1x1", sp,
                          make_conv(reduce, out, ext(3, 1, 1), one, ext(1, 0, 0), g), s2);
  };

  const PortRef b1 = b.conv_bn_relu(name + "/b1_1x1", ins[0], make_conv(in_ch[0], w.b1, one, one, zero, g), s1);
  PortRef b2 = b.conv_bn_relu(name + "/b2_reduce", ins[1], make_conv(in_ch[1], w.b2_reduce, one, one, zero, g), s1);
  b2 = two_layer("b2", b2, w.b2_reduce, w.b2_out);
  PortRef b3 = b.conv_bn_relu(name + "/b3_reduce", ins[2], make_conv(in_ch[2], w.b3_reduce, one, one, zero, g), s1);
  b3 = two_layer("b3", b3, w.b3_reduce, w.b3_out);
  PortRef b4 = b.pool(name + "/b4_pool", ins[3], make_pool(PoolKind::kMax, ext(3, 3, 3), one, ext(1, 1, 1)), s1);
  b4 = b.conv_bn_relu(name + "/b4_proj", b4, make_conv(in_ch[3], w.b4_proj, one, one, zero, g), s2);
  return b.concat(name + "/concat", {b1, b2, b3, b4}, Tag{group, name, 2});
}

InceptionWidths scaled(const InceptionWidths& w, double mult) {
  return {scale_width(w.b1, mult),        scale_width(w.b2_reduce, mult), scale_width(w.b2_out, mult),
          scale_width(w.b3_reduce, mult), scale_width(w.b3_out, mult),    scale_width(w.b4_proj, mult)};
}

}  // namespace

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::kI3D: return "i3d";
    case Arch::kIST: return "ist";
    case Arch::kSST: return "sst";
    case Arch::kGSST: return "gsst";
  }
  return "?";
}

Arch parse_arch(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "i3d" || s == "inc") return Arch::kI3D;
  if (s == "ist") return Arch::kIST;
  if (s == "sst") return Arch::kSST;
  if (s == "gsst") return Arch::kGSST;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected i3d|ist|sst|gsst)");
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kBatchNorm: return "bn";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kShuffle: return "shuffle";
    case LayerKind::kSplit: return "split";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

std::size_t LayerSpec::num_outputs() const {
  if (kind == LayerKind::kSplit) return std::get<SplitSpec>(params).sizes.size();
  return 1;
}

void ModuleGraph::validate() const {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.id.empty()) throw std::invalid_argument("layer with empty id at position " + std::to_string(i));
    if (seen.count(l.id) != 0) throw std::invalid_argument("duplicate layer id '" + l.id + "'");
    if (l.kind == LayerKind::kInput) {
      if (!l.inputs.empty()) throw std::invalid_argument("input layer '" + l.id + "' has predecessors");
    } else if (l.inputs.empty()) {
      throw std::invalid_argument("layer '" + l.id + "' has no predecessor");
    }
    for (const PortRef& p : l.inputs) {
      auto it = seen.find(p.layer);
      if (it == seen.end()) {
        throw std::invalid_argument("layer '" + l.id + "' references '" + p.layer +
                                    "' which is not an earlier layer (cycle or unknown id)");
      }
      if (p.port >= layers[it->second].num_outputs()) {
        throw std::invalid_argument("layer '" + l.id + "' references missing port " + std::to_string(p.port) +
                                    " of '" + p.layer + "'");
      }
    }
    seen.emplace(l.id, i);
  }
}

std::size_t ModuleGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].id == id) return i;
  }
  throw std::out_of_range("no layer '" + id + "'");
}

const LayerSpec& ModuleGraph::layer(const std::string& id) const { return layers[index_of(id)]; }

bool ModuleGraph::contains(const std::string& id) const {
  return std::any_of(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.id == id; });
}

std::size_t ModuleGraph::count(LayerKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.kind == kind; }));
}

void InceptionWidths::validate() const {
  if (b1 == 0 || b2_reduce == 0 || b2_out == 0 || b3_reduce == 0 || b3_out == 0 || b4_proj == 0) {
    throw std::invalid_argument("inception branch widths must all be positive");
  }
}

const std::array<NamedWidths, 9>& canonical_widths() {
  static const std::array<NamedWidths, 9> table = {{
      {"3b", {64, 96, 128, 16, 32, 32}},
      {"3c", {128, 128, 192, 32, 96, 64}},
      {"4b", {192, 96, 208, 16, 48, 64}},
      {"4c", {160, 112, 224, 24, 64, 64}},
      {"4d", {128, 128, 256, 24, 64, 64}},
      {"4e", {112, 144, 288, 32, 64, 64}},
      {"4f", {256, 160, 320, 32, 128, 128}},
      {"5b", {256, 160, 320, 32, 128, 128}},
      {"5c", {384, 192, 384, 48, 128, 128}},
  }};
  return table;
}

SplitAllocation allocate_groups(std::size_t group_count, const std::array<std::size_t, 4>& capacities,
                                std::size_t in_channels, std::size_t quantum) {
  if (quantum == 0 || group_count % quantum != 0) {
    throw std::invalid_argument("group count " + std::to_string(group_count) + " is not a multiple of quantum " +
                                std::to_string(quantum));
  }
  const std::size_t units = group_count / quantum;
  if (units < capacities.size()) {
    throw std::invalid_argument("group count " + std::to_string(group_count) + " leaves fewer units than branches");
  }
  std::size_t total = 0;
  for (std::size_t c : capacities) {
    if (c == 0) throw std::invalid_argument("branch capacities must be positive");
    total += c;
  }

  std::array<std::size_t, 4> alloc{};
  std::array<std::size_t, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t num = units * capacities[i];
    alloc[i] = num / total;
    remainder[i] = num % total;
    assigned += alloc[i];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a > b;
  });
  for (std::size_t k = 0; assigned < units; ++k, ++assigned) ++alloc[order[k % 4]];

  for (std::size_t i = 0; i < 4; ++i) {
    if (alloc[i] == 0) {
      const auto donor = std::max_element(alloc.begin(), alloc.end());
      --*donor;
      alloc[i] = 1;
    }
  }

  SplitAllocation out;
  out.group_count = group_count;
  for (std::size_t i = 0; i < 4; ++i) out.groups_per_path[i] = alloc[i] * quantum;
  if (in_channels != 0) {
    if (in_channels % group_count != 0) {
      throw std::invalid_argument(std::to_string(in_channels) + " channels not divisible into " +
                                  std::to_string(group_count) + " groups");
    }
    for (std::size_t i = 0; i < 4; ++i) out.channels_per_path[i] = out.groups_per_path[i] * (in_channels / group_count);
  }
  return out;
}

std::size_t scale_width(std::size_t width, double mult) {
  if (mult == 1.0) return width;
  if (!(mult > 0.0)) throw std::invalid_argument("width multiplier must be positive");
  const long pairs = std::lround(static_cast<double>(width) * mult / 2.0);
  return static_cast<std::size_t>(std::max(1L, pairs)) * 2;
}

std::size_t choose_shuffle_groups(std::size_t in_channels, std::size_t preferred, std::size_t quantum) {
  if (quantum == 0) throw std::invalid_argument("split quantum must be positive");
  for (std::size_t n = preferred; n >= 4 * quantum; --n) {
    if (in_channels % n == 0 && n % quantum == 0) return n;
  }
  throw ShapeError("no shuffle group count in [4, " + std::to_string(preferred) + "] divides " +
                   std::to_string(in_channels) + " channels with split unit " + std::to_string(quantum));
}

ModuleGraph build_inception_module(const InceptionWidths& widths, Arch variant, const Shape5& input,
                                   const std::string& name, const BuildOptions& options) {
  GraphBuilder b(variant, input, 0);
  const PortRef x = b.input(input);
  add_inception_module(b, name, widths, variant, x, "MG" + name.substr(0, 1), options);
  return b.finish();
}

ModuleGraph build_network(Arch arch, const Shape5& input_shape, std::size_t num_classes,
                          const BuildOptions& options) {
  if (!input_shape.valid()) throw ShapeError("invalid input shape " + input_shape.str());
  if (num_classes == 0) throw std::invalid_argument("class count must be positive");
  GraphBuilder b(arch, input_shape, num_classes);
  const double m = options.width_mult;
  const std::size_t c64 = scale_width(64, m);
  const std::size_t c192 = scale_width(192, m);
  const std::size_t g = arch == Arch::kGSST ? options.conv_groups : 1;
  const Extent3 one = ext(1, 1, 1);
  const Extent3 zero = ext(0, 0, 0);

  PortRef x = b.input(input_shape);
  try {
    if (arch == Arch::kI3D) {
      x = b.conv_bn_relu("conv1", x, make_conv(input_shape.c, c64, ext(7, 7, 7), ext(2, 2, 2), ext(3, 3, 3)),
                         Tag{"Conv1"});
    } else {
      x = b.conv_bn_relu("conv1_1x7x7", x,
                         make_conv(input_shape.c, c64, ext(1, 7, 7), ext(1, 2, 2), ext(0, 3, 3)), Tag{"Conv1"});
      x = b.conv_bn_relu("conv1_7x1x1", x, make_conv(c64, c64, ext(7, 1, 1), ext(2, 1, 1), ext(3, 0, 0)),
                         Tag{"Conv1"});
    }
    x = b.pool("pool1", x, make_pool(PoolKind::kMax, ext(1, 3, 3), ext(1, 2, 2), ext(0, 1, 1)), Tag{"Max-p1"});
    x = b.conv_bn_relu("conv2", x, make_conv(c64, c64, one, one, zero, g), Tag{"Conv2"});
    if (arch == Arch::kI3D) {
      x = b.conv_bn_relu("conv3", x, make_conv(c64, c192, ext(3, 3, 3), one, ext(1, 1, 1)), Tag{"Conv3"});
    } else {
      x = b.conv_bn_relu("conv3_1x3x3", x, make_conv(c64, c64, ext(1, 3, 3), one, ext(0, 1, 1), g), Tag{"Conv3"});
      x = b.conv_bn_relu("conv3_3x1x1", x, make_conv(c64, c192, ext(3, 1, 1), one, ext(1, 0, 0), g), Tag{"Conv3"});
    }
    x = b.pool("pool2", x, make_pool(PoolKind::kMax, ext(1, 3, 3), ext(1, 2, 2), ext(0, 1, 1)), Tag{"Max-p2"});

    for (const auto& [name, base] : canonical_widths()) {
      auto it = options.width_overrides.find(name);
      const InceptionWidths w = it != options.width_overrides.end() ? it->second : scaled(base, m);
      const std::string group = "MG" + name.substr(0, 1);
      x = add_inception_module(b, name, w, arch, x, group, options);
      if (name == "3c") {
        x = b.pool("pool3", x, make_pool(PoolKind::kMax, ext(3, 3, 3), ext(2, 2, 2), ext(1, 1, 1)), Tag{"Max-p3"});
      } else if (name == "4f") {
        x = b.pool("pool4", x, make_pool(PoolKind::kMax, ext(2, 2, 2), ext(2, 2, 2), zero), Tag{"Max-p4"});
      }
    }

    const Shape5 s = b.shape(x);
    x = b.pool("avgpool", x, make_pool(PoolKind::kAverage, ext(std::min<std::size_t>(2, s.t), s.h, s.w), one, zero),
               Tag{"Avg-p"});
    x = b.conv("classifier", x, make_conv(b.shape(x).c, num_classes, one, one, zero), Tag{"Classifier"});
    b.simple("softmax", LayerKind::kSoftmax, NoParams{}, x, Tag{"Classifier"});
  } catch (const ShapeError& e) {
    throw ShapeError("invalid input shape " + input_shape.str() + " for " + to_string(arch) + ": " + e.what());
  }
  return b.finish();
}

ModuleGraph extract_module(Arch arch, const Shape5& input_shape, std::size_t num_classes, const std::string& name,
                           const BuildOptions& options) {
  const auto& table = canonical_widths();
  const auto it = std::find_if(table.begin(), table.end(), [&](const NamedWidths& n) { return n.name == name; });
  if (it == table.end()) throw std::invalid_argument("unknown module '" + name + "'");
  const ModuleGraph net = build_network(arch, input_shape, num_classes, options);
  const LayerSpec& first = *std::find_if(net.layers.begin(), net.layers.end(),
                                         [&](const LayerSpec& l) { return l.module == name; });
  const Shape5 in = infer_shapes(net).at(first.inputs.at(0).layer).at(first.inputs.at(0).port);
  auto o = options.width_overrides.find(name);
  const InceptionWidths w = o != options.width_overrides.end() ? o->second : scaled(it->widths, options.width_mult);
  return build_inception_module(w, arch, in, name, options);
}

ShapeMap infer_shapes(const ModuleGraph& g) {
  g.validate();
  ShapeMap shapes;
  for (const LayerSpec& l : g.layers) {
    std::vector<Shape5> in;
    for (const PortRef& p : l.inputs) in.push_back(shapes.at(p.layer).at(p.port));
    try {
      shapes[l.id] = output_shapes(l, in);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.id + "': " + e.what());
    }
  }
  return shapes;
}

const LayerSpec& classifier_layer(const ModuleGraph& g) {
  for (auto it = g.layers.rbegin(); it != g.layers.rend(); ++it) {
    if (it->kind == LayerKind::kSoftmax) return g.layer(it->inputs.at(0).layer);
  }
  throw std::invalid_argument("graph has no softmax head");
}

std::string manifest_text(const ModuleGraph& g) {
  std::ostringstream os;
  for (const LayerSpec& l : g.layers) {
    if (l.kind == LayerKind::kConv) {
      const Conv3DSpec& c = l.conv();
      os << "conv\t" << l.id << "\tin=" << c.in_channels << "\tout=" << c.out_channels
         << "\tkernel=" << c.kernel.str() << "\tstride=" << c.stride.str() << "\tpad=" << c.padding.str()
         << "\tgroups=" << c.groups << "\n";
    } else if (l.kind == LayerKind::kBatchNorm) {
      os << "bn\t" << l.id << "\tchannels=" << std::get<BatchNormSpec>(l.params).channels << "\n";
    }
  }
  return os.str();
}

}  // namespace lw3d
