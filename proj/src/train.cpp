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

#include "lw3d/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lw3d/rng.hpp"

namespace lw3d {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor5D as_channel_tensor(const std::vector<float>& v) {
  return Tensor5D(Shape5{1, v.size(), 1, 1, 1}, v);
}

void accumulate_into(std::vector<Tensor5D>& slot, std::size_t port, std::size_t ports, Tensor5D g) {
  if (slot.empty()) slot.resize(ports);
  if (slot[port].size() == 0) {
    slot[port] = std::move(g);
  } else {
    add_inplace(slot[port], g);
  }
}

}  // namespace

Tensor5D stack_clips(std::span<const Sample> data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("stack_clips: no samples");
  Shape5 s = data[indices[0]].clip.shape();
  const std::size_t per = s.numel();
  s.n = indices.size();
  Tensor5D out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor5D& c = data[indices[i]].clip;
    if (c.size() != per || c.shape().n != 1) {
      throw ShapeError("stack_clips: clip " + std::to_string(indices[i]) + " has shape " + c.shape().str());
    }
    std::copy(c.data().begin(), c.data().end(), out.raw() + i * per);
  }
  return out;
}

Trainer::Trainer(const ModuleGraph& g, NetworkWeights w)
    : g_(g), w_(std::move(w)), logits_index_(g.index_of(classifier_layer(g).id)) {
  check_weights(g_, w_);
  for (const auto& [id, t] : w_.conv) params_.emplace(id, Parameter(t));
  for (const auto& [id, p] : w_.bn) {
    params_.emplace(id + "/gamma", Parameter(as_channel_tensor(p.gamma)));
    params_.emplace(id + "/beta", Parameter(as_channel_tensor(p.beta)));
  }
}

std::vector<Parameter*> Trainer::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : params_) out.push_back(&p);
  return out;
}

LossResult Trainer::accumulate(const Tensor5D& x, std::span<const std::size_t> labels) {
  const auto acts = forward_all(g_, w_, x);
  LossResult res = softmax_cross_entropy(acts[logits_index_][0], labels);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g_.layers.size(); ++i) index[g_.layers[i].id] = i;
  auto input_of = [&](const PortRef& p) -> const Tensor5D& { return acts[index.at(p.layer)].at(p.port); };

  std::vector<std::vector<Tensor5D>> grads(g_.layers.size());
  grads[logits_index_] = {res.dlogits};
  for (std::size_t i = logits_index_ + 1; i-- > 0;) {
    if (grads[i].empty()) continue;
    const LayerSpec& l = g_.layers[i];
    auto send = [&](std::size_t k, Tensor5D g) {
      const PortRef& p = l.inputs[k];
      const std::size_t j = index.at(p.layer);
      accumulate_into(grads[j], p.port, g_.layers[j].num_outputs(), std::move(g));
    };
    switch (l.kind) {
      case LayerKind::kInput:
        break;
      case LayerKind::kConv: {
        ConvGrads cg = conv3d_backward(input_of(l.inputs[0]), l.conv(), w_.conv.at(l.id), grads[i][0]);
        add_inplace(params_.at(l.id).grad, cg.dw);
        send(0, std::move(cg.dx));
        break;
      }
      case LayerKind::kPool:
        send(0, pool3d_backward(input_of(l.inputs[0]), l.pool(), grads[i][0]));
        break;
      case LayerKind::kBatchNorm: {
        BatchNormGrads bg = batchnorm_backward(input_of(l.inputs[0]), w_.bn.at(l.id), grads[i][0]);
        Tensor5D& dg = params_.at(l.id + "/gamma").grad;
        Tensor5D& db = params_.at(l.id + "/beta").grad;
        for (std::size_t c = 0; c < bg.dgamma.size(); ++c) {
          dg[c] += static_cast<float>(bg.dgamma[c]);
          db[c] += static_cast<float>(bg.dbeta[c]);
        }
        send(0, std::move(bg.dx));
        break;
      }
      case LayerKind::kRelu:
        send(0, relu_backward(input_of(l.inputs[0]), grads[i][0]));
        break;
      case LayerKind::kShuffle:
        send(0, channel_shuffle_backward(grads[i][0], std::get<ShuffleSpec>(l.params).groups));
        break;
      case LayerKind::kSplit: {
        std::vector<Tensor5D> parts = std::move(grads[i]);
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (parts[k].size() == 0) parts[k] = Tensor5D(acts[i][k].shape());
        }
        send(0, split_backward(parts));
        break;
      }
      case LayerKind::kConcat: {
        std::vector<std::size_t> sizes;
        for (const PortRef& p : l.inputs) sizes.push_back(input_of(p).shape().c);
        auto parts = concat_backward(grads[i][0], sizes);
        for (std::size_t k = 0; k < parts.size(); ++k) send(k, std::move(parts[k]));
        break;
      }
      case LayerKind::kSoftmax:
        throw std::logic_error("softmax inside the differentiated region");
    }
    grads[i].clear();
  }
  return res;
}

void Trainer::sync() {
  for (auto& [id, t] : w_.conv) t = params_.at(id).value;
  for (auto& [id, p] : w_.bn) {
    const Tensor5D& gm = params_.at(id + "/gamma").value;
    const Tensor5D& bt = params_.at(id + "/beta").value;
    p.gamma.assign(gm.raw(), gm.raw() + gm.size());
    p.beta.assign(bt.raw(), bt.raw() + bt.size());
  }
}

void Trainer::step(const TrainConfig& cfg, float lr) {
  const auto ps = parameters();
  sgd_step(ps, cfg, lr);
  sync();
}

EvalResult evaluate(const ModuleGraph& g, const NetworkWeights& w, std::span<const Sample> data,
                    std::size_t batch_size) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult r;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    std::vector<std::size_t> labels;
    for (std::size_t i : idx) labels.push_back(data[i].label);
    Tensor5D logits;
    ForwardOptions opt;
    opt.before_layer = [&](const LayerSpec& l, std::span<const Tensor5D* const> in) {
      if (l.kind == LayerKind::kSoftmax) logits = *in[0];
    };
    forward(g, w, stack_clips(data, idx), opt);
    const LossResult lr = softmax_cross_entropy(logits, labels);
    r.loss += lr.loss * static_cast<double>(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) correct += argmax(lr.probs[k]) == labels[k] ? 1 : 0;
  }
  r.loss /= static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

TrainResult train_toy(const ModuleGraph& g, std::span<const Sample> data, const TrainConfig& cfg,
                      NetworkWeights init, const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_toy: empty dataset");
  for (const Sample& s : data) {
    if (s.label >= g.num_classes) {
      throw std::invalid_argument("label " + std::to_string(s.label) + " not below class count " +
                                  std::to_string(g.num_classes));
    }
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  Trainer trainer(g, std::move(init));
  PlateauScheduler sched(cfg);
  Rng rng(cfg.seed);
  TrainResult result;
  float lr = cfg.learning_rate;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      std::vector<std::size_t> labels;
      for (std::size_t i : idx) labels.push_back(data[i].label);
      trainer.accumulate(stack_clips(data, idx), labels);
      trainer.step(cfg, lr);
    }
    const EvalResult ev = evaluate(g, trainer.weights(), data, cfg.batch_size);
    const EpochStats st{epoch, ev.loss, ev.accuracy, lr};
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
    lr = sched.step(ev.loss);
  }
  result.weights = trainer.weights();
  return result;
}

}  // namespace lw3d
