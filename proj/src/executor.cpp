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

#include "lw3d/executor.hpp"

#include <fstream>
#include <sstream>

namespace lw3d {

namespace {

constexpr const char* kWeightsMagic = "LW3DWEIGHTS 1";

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::string id_of(const std::string& manifest_line) {
  const auto a = manifest_line.find('\t');
  if (a == std::string::npos) return manifest_line;
  const auto b = manifest_line.find('\t', a + 1);
  return manifest_line.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
}

Tensor5D pack_bn(const BatchNormParams& p) {
  const std::size_t c = p.channels();
  Tensor5D t(Shape5{4, c, 1, 1, 1});
  for (std::size_t i = 0; i < c; ++i) {
    t[i] = p.gamma[i];
    t[c + i] = p.beta[i];
    t[2 * c + i] = p.mean[i];
    t[3 * c + i] = p.var[i];
  }
  return t;
}

BatchNormParams unpack_bn(const Tensor5D& t) {
  const std::size_t c = t.shape().c;
  BatchNormParams p;
  p.gamma.assign(t.raw(), t.raw() + c);
  p.beta.assign(t.raw() + c, t.raw() + 2 * c);
  p.mean.assign(t.raw() + 2 * c, t.raw() + 3 * c);
  p.var.assign(t.raw() + 3 * c, t.raw() + 4 * c);
  return p;
}

const Tensor5D& conv_weight(const NetworkWeights& w, const std::string& id) {
  auto it = w.conv.find(id);
  if (it == w.conv.end()) throw WeightError("missing weights for conv layer '" + id + "'");
  return it->second;
}

const BatchNormParams& bn_params(const NetworkWeights& w, const std::string& id) {
  auto it = w.bn.find(id);
  if (it == w.bn.end()) throw WeightError("missing parameters for batch-norm layer '" + id + "'");
  return it->second;
}

// Evaluates one layer given its input tensors.
std::vector<Tensor5D> eval_layer(const ModuleGraph& g, const LayerSpec& l, const NetworkWeights& w,
                                 const std::vector<const Tensor5D*>& in, const Tensor5D& x,
                                 const ForwardOptions& opt) {
  switch (l.kind) {
    case LayerKind::kInput: {
      const Shape5& s = x.shape();
      const Shape5& e = g.input_shape;
      if (s.c != e.c || s.t != e.t || s.h != e.h || s.w != e.w) {
        throw ShapeError("input " + s.str() + " does not match graph input " + e.str() + " (batch may differ)");
      }
      return {x};
    }
    case LayerKind::kConv: {
      const Tensor5D& wt = conv_weight(w, l.id);
      if (opt.counter != nullptr || opt.conv == ConvImpl::kDirect) {
        return {conv3d_direct(*in[0], l.conv(), wt, opt.counter)};
      }
      return {conv3d_lowered(*in[0], l.conv(), wt)};
    }
    case LayerKind::kPool:
      return {pool3d(*in[0], l.pool(), opt.counter)};
    case LayerKind::kBatchNorm:
      return {batchnorm_infer(*in[0], bn_params(w, l.id))};
    case LayerKind::kRelu:
      return {relu(*in[0])};
    case LayerKind::kShuffle:
      return {channel_shuffle(*in[0], std::get<ShuffleSpec>(l.params).groups)};
    case LayerKind::kSplit:
      return split_channels(*in[0], std::get<SplitSpec>(l.params).sizes);
    case LayerKind::kConcat: {
      std::vector<Tensor5D> parts;
      for (const Tensor5D* p : in) parts.push_back(*p);
      return {concat_channels(parts)};
    }
    case LayerKind::kSoftmax:
      return {softmax_channels(*in[0])};
  }
  throw std::logic_error("unhandled layer kind");
}

std::vector<std::vector<Tensor5D>> run(const ModuleGraph& g, const NetworkWeights& w, const Tensor5D& x,
                                       const ForwardOptions& opt, bool keep_all) {
  g.validate();
  if (g.layers.empty()) throw std::invalid_argument("empty graph");
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> remaining(g.layers.size(), 0);
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    index[g.layers[i].id] = i;
    for (const PortRef& p : g.layers[i].inputs) ++remaining[index.at(p.layer)];
  }
  std::vector<std::vector<Tensor5D>> acts(g.layers.size());
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    std::vector<const Tensor5D*> in;
    for (const PortRef& p : l.inputs) in.push_back(&acts[index.at(p.layer)].at(p.port));
    if (opt.before_layer) opt.before_layer(l, in);
    try {
      acts[i] = eval_layer(g, l, w, in, x, opt);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.id + "': " + e.what());
    }
    if (!keep_all) {
      for (const PortRef& p : l.inputs) {
        const std::size_t j = index.at(p.layer);
        if (--remaining[j] == 0) acts[j].clear();
      }
    }
  }
  return acts;
}

}  // namespace

NetworkWeights init_weights(const ModuleGraph& g, std::uint64_t seed, InitScheme scheme) {
  NetworkWeights w;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    if (l.kind == LayerKind::kConv) {
      w.conv.emplace(l.id, init_conv_weights(l.conv(), mix_seed(seed, i), scheme));
    } else if (l.kind == LayerKind::kBatchNorm) {
      w.bn.emplace(l.id, BatchNormParams::identity(std::get<BatchNormSpec>(l.params).channels));
    }
  }
  return w;
}

NetworkWeights zero_weights(const ModuleGraph& g) {
  NetworkWeights w;
  for (const LayerSpec& l : g.layers) {
    if (l.kind == LayerKind::kConv) {
      w.conv.emplace(l.id, zeros(l.conv().weight_shape()));
    } else if (l.kind == LayerKind::kBatchNorm) {
      w.bn.emplace(l.id, BatchNormParams::identity(std::get<BatchNormSpec>(l.params).channels));
    }
  }
  return w;
}

void check_weights(const ModuleGraph& g, const NetworkWeights& w) {
  for (const LayerSpec& l : g.layers) {
    if (l.kind == LayerKind::kConv) {
      const Tensor5D& t = conv_weight(w, l.id);
      if (t.shape() != l.conv().weight_shape()) {
        throw WeightError("layer '" + l.id + "': weight shape " + t.shape().str() + ", expected " +
                          l.conv().weight_shape().str());
      }
    } else if (l.kind == LayerKind::kBatchNorm) {
      const BatchNormParams& p = bn_params(w, l.id);
      const std::size_t c = std::get<BatchNormSpec>(l.params).channels;
      if (p.channels() != c || p.beta.size() != c || p.mean.size() != c || p.var.size() != c) {
        throw WeightError("layer '" + l.id + "': batch-norm parameters do not have " + std::to_string(c) +
                          " channels");
      }
    }
  }
}

void save_weights(const std::string& path, const ModuleGraph& g, const NetworkWeights& w) {
  check_weights(g, w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os << kWeightsMagic << "\n" << manifest_text(g) << "END\n";
  for (const LayerSpec& l : g.layers) {
    if (l.kind == LayerKind::kConv) {
      write_tensor(os, w.conv.at(l.id));
    } else if (l.kind == LayerKind::kBatchNorm) {
      write_tensor(os, pack_bn(w.bn.at(l.id)));
    }
  }
  if (!os) throw FormatError("failed writing '" + path + "'");
}

NetworkWeights load_weights(const std::string& path, const ModuleGraph& g) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open weight file '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != kWeightsMagic) throw WeightError("'" + path + "' is not a weight file");

  const std::vector<std::string> expected = lines_of(manifest_text(g));
  std::vector<std::string> found;
  while (std::getline(is, line) && line != "END") found.push_back(line);
  if (line != "END") throw WeightError("weight file manifest is not terminated");
  for (std::size_t i = 0; i < std::max(expected.size(), found.size()); ++i) {
    if (i >= expected.size()) throw WeightError("layer '" + id_of(found[i]) + "': not present in the graph");
    if (i >= found.size()) throw WeightError("layer '" + id_of(expected[i]) + "': missing from the weight file");
    if (expected[i] != found[i]) {
      throw WeightError("layer '" + id_of(expected[i]) + "': manifest mismatch, expected [" + expected[i] +
                        "] found [" + found[i] + "]");
    }
  }

  NetworkWeights w;
  for (const LayerSpec& l : g.layers) {
    if (l.kind != LayerKind::kConv && l.kind != LayerKind::kBatchNorm) continue;
    Tensor5D t;
    try {
      t = read_tensor(is);
    } catch (const FormatError& e) {
      throw WeightError("layer '" + l.id + "': " + e.what());
    }
    if (l.kind == LayerKind::kConv) {
      if (t.shape() != l.conv().weight_shape()) {
        throw WeightError("layer '" + l.id + "': record shape " + t.shape().str() + ", expected " +
                          l.conv().weight_shape().str());
      }
      w.conv.emplace(l.id, std::move(t));
    } else {
      const std::size_t c = std::get<BatchNormSpec>(l.params).channels;
      if (t.shape() != Shape5{4, c, 1, 1, 1}) {
        throw WeightError("layer '" + l.id + "': record shape " + t.shape().str() + ", expected " +
                          Shape5{4, c, 1, 1, 1}.str());
      }
      w.bn.emplace(l.id, unpack_bn(t));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw WeightError("trailing data after the last weight record");
  return w;
}

Tensor5D forward(const ModuleGraph& g, const NetworkWeights& w, const Tensor5D& x, const ForwardOptions& opt) {
  auto acts = run(g, w, x, opt, false);
  return std::move(acts.back().front());
}

std::vector<std::vector<Tensor5D>> forward_all(const ModuleGraph& g, const NetworkWeights& w, const Tensor5D& x,
                                               const ForwardOptions& opt) {
  return run(g, w, x, opt, true);
}

std::vector<std::vector<float>> average_positions(const Tensor5D& probs) {
  const Shape5& s = probs.shape();
  const std::size_t sites = s.sites();
  std::vector<std::vector<float>> out(s.n, std::vector<float>(s.c, 0.0f));
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* p = probs.channel(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < sites; ++i) acc += p[i];
      out[n][c] = static_cast<float>(acc / static_cast<double>(sites));
    }
  }
  return out;
}

}  // namespace lw3d
