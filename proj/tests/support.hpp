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

// Shared helpers for the unit tests: random tensors, central differences and
// small fixtures.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "profiti/profiti.hpp"

namespace profiti::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// Fixed weights so that sum(w * out) exercises every output entry differently.
inline Tensor probe_weights(const Shape& shape) {
  Tensor w(shape);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.3 * static_cast<double>(i) + 0.4);
  return w;
}

inline ad::Var project(const ad::Var& out) {
  ad::Tape& t = *out.tape();
  return ad::sum(ad::mul(out, t.constant(probe_weights(out.shape()))));
}

using Builder = std::function<ad::Var(std::vector<ad::Var>&)>;

/// Largest |analytic - numeric| / max(1, |numeric|) over every input entry.
inline double gradient_error(const Builder& f, const std::vector<Tensor>& inputs, double h = 1e-6) {
  ad::Tape tape(true);
  std::vector<ad::Var> vars;
  for (const Tensor& x : inputs) vars.push_back(tape.variable(x));
  ad::Var out = f(vars);
  if (out.value().size() != 1) out = project(out);
  tape.backward(out);

  auto eval = [&](const std::vector<Tensor>& xs) {
    ad::Tape t(false);
    std::vector<ad::Var> v;
    for (const Tensor& x : xs) v.push_back(t.constant(x));
    ad::Var o = f(v);
    if (o.value().size() != 1) o = project(o);
    return o.value().item();
  };

  double worst = 0.0;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    const Tensor* g = tape.gradient(vars[a]);
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[a][i] += h;
      minus[a][i] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
      const double analytic = g ? (*g)[i] : 0.0;
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

inline SeriesInstance make_instance(std::string id, int channels, std::vector<Observation> obs, std::vector<Query> qry,
                                    std::optional<std::vector<double>> ans = std::nullopt) {
  SeriesInstance s;
  s.id = std::move(id);
  s.channels = channels;
  s.observations = std::move(obs);
  s.queries = std::move(qry);
  s.answers = std::move(ans);
  return s;
}

/// Small model: few dims so finite differences and quadrature stay cheap.
inline ModelConfig small_config(int channels, std::size_t blocks) {
  ModelConfig c;
  c.channels = channels;
  c.encoder.model_dim = 8;
  c.encoder.time_features = 4;
  c.encoder.channel_dim = 3;
  c.encoder.value_dim = 3;
  c.encoder.heads = 2;
  c.encoder.layers = 1;
  c.blocks = blocks;
  return c;
}

/// Scales every flow parameter so the transformation is far from identity.
inline void perturb_flow(Model& m, std::uint64_t seed, double amount = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, amount);
  for (std::size_t i = 0; i < m.parameters().count(); ++i) {
    if (m.parameters().info(i).name.rfind("flow.", 0) != 0) continue;
    for (double& v : m.parameters().values(i)) v += n(rng);
  }
}

/// Leibniz expansion of det(A): independent of any factorization.
inline double leibniz_det(const Tensor& a) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  double det = 0.0;
  do {
    int inversions = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) inversions += p[i] > p[j];
    double prod = inversions % 2 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) prod *= a(i, p[i]);
    det += prod;
  } while (std::next_permutation(p.begin(), p.end()));
  return det;
}

/// Captures warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() : saved_(warning_sink()) {
    warning_sink() = [this](const std::string& m) { messages.push_back(m); };
  }
  ~WarningCapture() { warning_sink() = saved_; }
  std::vector<std::string> messages;

 private:
  WarningSink saved_;
};

}  // namespace profiti::testing
