// Copyright 2026 The ProFITi Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "profiti/autodiff.hpp"
#include "profiti/errors.hpp"
#include "profiti/tensor.hpp"

namespace profiti {

struct ParameterInfo {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named parameter tensors packed into one flat buffer, in registration order.
class ParameterStore {
 public:
  std::size_t add(std::string name, const Tensor& init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    ParameterInfo info{name, init.shape(), flat_.size(), init.size()};
    flat_.insert(flat_.end(), init.values().begin(), init.values().end());
    by_name_.emplace(name, infos_.size());
    infos_.push_back(std::move(info));
    return infos_.size() - 1;
  }

  std::size_t count() const noexcept { return infos_.size(); }
  std::size_t total_size() const noexcept { return flat_.size(); }
  const std::vector<ParameterInfo>& infos() const noexcept { return infos_; }
  const ParameterInfo& info(std::size_t i) const { return infos_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }

  Tensor tensor(std::size_t i) const {
    const ParameterInfo& p = infos_.at(i);
    return Tensor(p.shape, std::vector<double>(flat_.begin() + p.offset, flat_.begin() + p.offset + p.size));
  }
  Tensor tensor(std::string_view name) const { return tensor(index(name)); }

  std::span<double> values(std::size_t i) {
    const ParameterInfo& p = infos_.at(i);
    return std::span<double>(flat_).subspan(p.offset, p.size);
  }
  std::span<const double> values(std::size_t i) const {
    const ParameterInfo& p = infos_.at(i);
    return std::span<const double>(flat_).subspan(p.offset, p.size);
  }

  std::span<double> flat() noexcept { return flat_; }
  std::span<const double> flat() const noexcept { return flat_; }

  void set(std::size_t i, const Tensor& value) {
    const ParameterInfo& p = infos_.at(i);
    if (value.shape() != p.shape) {
      throw ShapeError("parameter '" + p.name + "' has shape " + to_string(p.shape) + ", got " +
                       to_string(value.shape()));
    }
    std::copy(value.values().begin(), value.values().end(), flat_.begin() + p.offset);
  }

  /// Name of the parameter owning flat position `pos`.
  const std::string& owner(std::size_t pos) const {
    for (const ParameterInfo& p : infos_)
      if (pos >= p.offset && pos < p.offset + p.size) return p.name;
    throw ShapeError("flat position out of range");
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.flat_ != b.flat_ || a.infos_.size() != b.infos_.size()) return false;
    for (std::size_t i = 0; i < a.infos_.size(); ++i)
      if (a.infos_[i].name != b.infos_[i].name || a.infos_[i].shape != b.infos_[i].shape) return false;
    return true;
  }

 private:
  std::vector<ParameterInfo> infos_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::vector<double> flat_;
};

/// Lazily creates one tape leaf per parameter.
class ParameterBinding {
 public:
  ParameterBinding(ad::Tape& tape, const ParameterStore& store)
      : tape_(tape), store_(store), leaves_(store.count()) {}

  ad::Var operator()(std::size_t i) {
    if (!leaves_.at(i)) leaves_[i] = tape_.parameter(store_.tensor(i), i);
    return *leaves_[i];
  }
  ad::Var operator()(std::string_view name) { return (*this)(store_.index(name)); }

  ad::Tape& tape() noexcept { return tape_; }
  const ParameterStore& store() const noexcept { return store_; }

 private:
  ad::Tape& tape_;
  const ParameterStore& store_;
  std::vector<std::optional<ad::Var>> leaves_;
};

/// Adds the parameter gradients held by `tape` into a flat buffer laid out like `store`.
inline void accumulate_gradients(const ad::Tape& tape, const ParameterStore& store, std::span<double> flat) {
  if (flat.size() != store.total_size()) throw ShapeError("gradient buffer does not match parameter store");
  tape.for_each_parameter_gradient([&](std::size_t index, const Tensor& g) {
    const ParameterInfo& p = store.info(index);
    for (std::size_t k = 0; k < p.size; ++k) flat[p.offset + k] += g[k];
  });
}

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over the flat parameter buffer.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamOptions options) : options_(options), m_(size, 0.0), v_(size, 0.0) {}

  void step(ParameterStore& store, std::span<const double> grads) {
    if (grads.size() != store.total_size() || m_.size() != grads.size()) {
      throw ShapeError("adam: parameter, gradient and state sizes disagree (" + std::to_string(store.total_size()) +
                       ", " + std::to_string(grads.size()) + ", " + std::to_string(m_.size()) + ")");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (std::isnan(grads[i])) throw NumericError("adam: NaN gradient for parameter '" + store.owner(i) + "'");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    std::span<double> p = store.flat();
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const double g = grads[i];
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
      v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      p[i] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace profiti
