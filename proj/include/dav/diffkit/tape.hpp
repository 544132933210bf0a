// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/diffkit/tensor.hpp"

namespace dav {

/// Named trainable tensors with gradient accumulators. Iteration order is the
/// lexicographic name order, which keeps checkpoints and optimizer updates
/// deterministic.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    Tensor<T> value;
    Tensor<T> grad;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    Tensor<T> grad(value.shape());
    auto& e = entries_[name];
    e.value = std::move(value);
    e.grad = std::move(grad);
    return e.value;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }
  const Tensor<T>& grad(const std::string& name) const { return entry(name).grad; }

  void zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(T(0));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.numel();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>());
    return out;
  }

  /// Checksum over the raw bits of every parameter accepted by `filter`.
  std::uint64_t checksum(const std::function<bool(const std::string&)>& filter = {}) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, e] : entries_) {
      if (filter && !filter(name)) continue;
      h = fnv1a(name.data(), name.size(), h);
      h = dav::checksum(e.value, h);
    }
    return h;
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const { return tape->requires_grad(id); }
};

/// Records primitive operations for reverse-mode differentiation. Single
/// writer: one tape per forward pass and thread.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;
  using TrainableFilter = std::function<bool(const std::string&)>;

  explicit Tape(ParameterSet<T>* params = nullptr, TrainableFilter trainable = {})
      : params_(params), grads_(params), trainable_(std::move(trainable)) {}

  /// Inference tape: every parameter is a constant.
  explicit Tape(const ParameterSet<T>* params)
      : params_(params), grads_(nullptr), trainable_([](const std::string&) { return false; }) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), {}, nullptr, false, {}); }

  /// Leaf bound to a parameter. Frozen parameters become constants so the
  /// backward pass skips their weight gradients entirely.
  Var<T> param(const std::string& name) {
    if (!params_) throw std::logic_error("tape has no parameter set");
    auto cached = param_ids_.find(name);
    if (cached != param_ids_.end()) return {this, cached->second};
    const bool trainable = !trainable_ || trainable_(name);
    auto v = push(params_->value(name), {}, nullptr, trainable, trainable ? name : std::string{});
    param_ids_[name] = v.id;
    return v;
  }

  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, Backward backward) {
    bool rg = false;
    for (auto i : inputs) rg = rg || nodes_[i].requires_grad;
    return push(std::move(value), std::move(inputs), rg ? std::move(backward) : nullptr, rg, {});
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  /// Gradient buffer of a node; only valid during or after backward().
  Tensor<T>& grad(std::size_t id) { return nodes_.at(id).grad; }

  std::size_t size() const { return nodes_.size(); }
  const ParameterSet<T>* parameters() const { return params_; }

  /// Propagates `seed` from the scalar `loss` and accumulates into the
  /// parameter set's gradients. May be replayed; node gradients are reset on
  /// each call while parameter accumulators keep adding.
  void backward(Var<T> loss, T seed = T(1)) {
    if (nodes_.empty() || loss.tape != this || loss.id >= nodes_.size()) {
      throw std::logic_error("backward called before a forward pass was recorded");
    }
    if (nodes_[loss.id].value.numel() != 1) {
      throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                  shape_str(nodes_[loss.id].value.shape()));
    }
    for (auto& n : nodes_) {
      if (n.requires_grad) {
        n.grad = Tensor<T>(n.value.shape());
      } else {
        n.grad = Tensor<T>();
      }
    }
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad[0] = seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (!n.param.empty()) {
        auto& acc = grads_->grad(n.param);
        for (std::size_t k = 0; k < acc.numel(); ++k) acc[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool requires_grad = false;
    std::string param;
  };

  Var<T> push(Tensor<T> value, std::vector<std::size_t> inputs, Backward backward, bool rg, std::string param) {
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(backward), rg, std::move(param)});
    return {this, nodes_.size() - 1};
  }

  const ParameterSet<T>* params_;
  ParameterSet<T>* grads_;
  TrainableFilter trainable_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_ids_;
};

}  // namespace dav
