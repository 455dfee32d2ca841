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

// The conditional flow.
//
// Density direction (y -> z), per instance, in query-sorted order:
//   standardize per channel  ->  y + shift_0(x)  ->  L x [ attention, EL, Shiesh ]
// and log p(y) = log N(z; 0, I) + sum of the log-Jacobians of every step.
// Sampling runs the exact inverses in reverse order.
//
// Everything that depends only on (x^obs, x^qry) -- the condition matrix, the
// attention matrices, the EL scales and shifts -- is computed once per
// instance on a tape (`condition`). Training differentiates through it; the
// evaluation path copies the values into a FlowPlan and runs plain loops.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "profiti/autodiff.hpp"
#include "profiti/encoder.hpp"
#include "profiti/errors.hpp"
#include "profiti/imts.hpp"
#include "profiti/layers.hpp"
#include "profiti/parameters.hpp"
#include "profiti/shiesh.hpp"

namespace profiti {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

struct ModelConfig {
  int channels = 1;
  EncoderConfig encoder;
  std::size_t blocks = 4;
  std::size_t attention_dim = 0;  // 0: encoder.model_dim
  std::size_t hidden_dim = 0;     // width of the EL networks; 0: encoder.model_dim
  double epsilon = 1e-5;
  double shiesh_b = 1.0;
  SortCriterion sort;
  bool use_attention = true;
  AttentionKind attention = AttentionKind::Triangular;
  bool use_shiesh = true;

  std::size_t attention_width() const { return attention_dim ? attention_dim : encoder.model_dim; }
  std::size_t hidden_width() const { return hidden_dim ? hidden_dim : encoder.model_dim; }

  void validate() const {
    if (channels < 1) throw ConfigError("model: channels must be >= 1");
    if (blocks < 1) throw ConfigError("model: needs at least one block");
    if (!(epsilon > 0.0)) throw ConfigError("model: epsilon must be positive");
    if (!(shiesh_b > 0.0)) throw ConfigError("model: Shiesh b must be positive");
    encoder.validate();
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Ablation switches. `attention` may only be set while attention is in use.
struct VariantFlags {
  bool use_sita = true;
  std::optional<AttentionKind> attention;
  bool use_shiesh = true;
};

inline ModelConfig apply_variant(ModelConfig base, const VariantFlags& flags) {
  if (!flags.use_sita && flags.attention) {
    throw ConfigError("variant: attention kind '" + to_string(*flags.attention) +
                      "' given while the attention layer is disabled");
  }
  base.use_attention = flags.use_sita;
  base.attention = flags.attention.value_or(AttentionKind::Triangular);
  base.use_shiesh = flags.use_shiesh;
  base.validate();
  return base;
}

class Model {
 public:
  Model() = default;

  /// Fresh model with random weights and identity standardization.
  Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    register_encoder_parameters(params_, config_.encoder, config_.channels, rng);
    const std::size_t d = config_.encoder.model_dim;
    const std::size_t h = config_.hidden_width();
    const std::size_t da = config_.attention_width();
    auto add_mlp = [&](const std::string& prefix) {
      params_.add(prefix + ".w1", detail::glorot(d, h, rng));
      params_.add(prefix + ".b1", Tensor::matrix(1, h));
      params_.add(prefix + ".w2", detail::random_matrix(h, 1, 0.01 / std::sqrt(static_cast<double>(h)), rng));
      params_.add(prefix + ".b2", Tensor::matrix(1, 1));
    };
    add_mlp("flow.initial.shift");
    for (std::size_t b = 0; b < config_.blocks; ++b) {
      const std::string p = block_prefix(b);
      if (config_.use_attention) {
        const double s = 0.1 / std::sqrt(static_cast<double>(d));
        params_.add(p + "attn.wq", detail::random_matrix(d, da, s, rng));
        params_.add(p + "attn.wk", detail::random_matrix(d, da, s, rng));
      }
      add_mlp(p + "el.scale");
      add_mlp(p + "el.shift");
    }
    stats_ = NormalizationStats::identity(config_.channels);
  }

  /// Model from stored parameters; the layout must match what `config` creates.
  Model(ModelConfig config, ParameterStore params, NormalizationStats stats)
      : config_(std::move(config)), params_(std::move(params)), stats_(std::move(stats)) {
    config_.validate();
    const Model reference(config_, 0);
    if (reference.params_.count() != params_.count()) {
      throw SchemaError("parameter table has " + std::to_string(params_.count()) + " entries, configuration expects " +
                        std::to_string(reference.params_.count()));
    }
    for (std::size_t i = 0; i < params_.count(); ++i) {
      const auto& a = reference.params_.info(i);
      const auto& b = params_.info(i);
      if (a.name != b.name || a.shape != b.shape) {
        throw SchemaError("parameter '" + b.name + "' " + to_string(b.shape) + " does not match expected '" + a.name +
                          "' " + to_string(a.shape));
      }
    }
    if (stats_.channel_mean.size() != static_cast<std::size_t>(config_.channels) ||
        stats_.channel_std.size() != static_cast<std::size_t>(config_.channels)) {
      throw SchemaError("normalization statistics do not cover every channel");
    }
  }

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }
  NormalizationStats& normalization() noexcept { return stats_; }
  const NormalizationStats& normalization() const noexcept { return stats_; }

  static std::string block_prefix(std::size_t b) { return "flow.block" + std::to_string(b) + "."; }

  friend bool operator==(const Model& a, const Model& b) {
    return a.config_ == b.config_ && a.params_ == b.params_ && a.stats_ == b.stats_;
  }

 private:
  ModelConfig config_;
  ParameterStore params_;
  NormalizationStats stats_;
};

/// Model built from `base` with the ablation switches applied.
inline Model build_variant(const ModelConfig& base, const VariantFlags& flags, std::uint64_t seed) {
  return Model(apply_variant(base, flags), seed);
}

// ---- conditioning (differentiable) -------------------------------------------

struct BlockConditioning {
  std::optional<ad::Var> matrix;      // [K, K] in sorted order
  std::optional<ad::Var> matrix_log_det;
  ad::Var log_scale;                  // [K, 1]
  ad::Var shift;                      // [K, 1]
};

struct Conditioning {
  Permutation order;  // sorted position -> original query index
  ad::Var x;          // [K, d], sorted
  ad::Var initial_shift;
  std::vector<BlockConditioning> blocks;
};

namespace detail {

inline void check_instance_for(const Model& model, const SeriesInstance& inst) {
  if (inst.channels != model.config().channels) {
    throw DataError("series '" + inst.id + "' has " + std::to_string(inst.channels) + " channels, model expects " +
                    std::to_string(model.config().channels));
  }
  if (inst.queries.empty()) throw DataError("series '" + inst.id + "' has no queries");
}

inline ad::Var mlp_from(ParameterBinding& p, const std::string& prefix, const ad::Var& x) {
  return ad::mlp(x, p(prefix + ".w1"), p(prefix + ".b1"), p(prefix + ".w2"), p(prefix + ".b2"));
}

}  // namespace detail

/// Everything the flow needs that does not depend on the answers. With
/// `factorized` the attention matrices keep only their diagonals.
inline Conditioning condition(ParameterBinding& p, const Model& model, const SeriesInstance& inst,
                              bool factorized = false) {
  detail::check_instance_for(model, inst);
  const ModelConfig& cfg = model.config();
  Conditioning c;
  c.order = argsort_queries(inst.queries, cfg.sort);
  const std::vector<Query> sorted = apply_permutation(inst.queries, c.order);
  c.x = encode_queries(p, cfg.encoder, model.normalization(), inst.observations, sorted, cfg.channels);
  c.initial_shift = detail::mlp_from(p, "flow.initial.shift", c.x);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string pre = Model::block_prefix(b);
    BlockConditioning bc;
    if (cfg.use_attention) {
      const ad::Var scores = ad::attention_scores(c.x, p(pre + "attn.wq"), p(pre + "attn.wk"));
      auto [m, logdet] = ad::attention_matrix(cfg.attention, scores, cfg.epsilon, factorized);
      bc.matrix = m;
      bc.matrix_log_det = logdet;
    }
    bc.log_scale = ad::tanh(detail::mlp_from(p, pre + "el.scale", c.x));
    bc.shift = detail::mlp_from(p, pre + "el.shift", c.x);
    c.blocks.push_back(bc);
  }
  return c;
}

/// Differentiable log p(y | x^obs, x^qry) for the instance's own answers.
inline ad::Var log_density(ParameterBinding& p, const Model& model, const SeriesInstance& inst,
                           const Conditioning& c) {
  const ModelConfig& cfg = model.config();
  const auto& y = inst.answer_values();
  const std::size_t k = inst.queries.size();
  ad::Tape& t = p.tape();
  Tensor centered = Tensor::matrix(k, 1);
  Tensor inv_std = Tensor::matrix(k, 1);
  double log_det = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = c.order[j];
    const int ch = inst.queries[i].channel;
    centered(j, 0) = y[i] - model.normalization().channel_mean[ch];
    inv_std(j, 0) = 1.0 / model.normalization().channel_std[ch];
    log_det -= std::log(model.normalization().channel_std[ch]);
  }
  ad::Var u = ad::mul(t.constant(centered), t.constant(inv_std));
  ad::Var total = t.constant(Tensor::scalar(log_det));
  u = ad::add(u, c.initial_shift);
  for (const BlockConditioning& b : c.blocks) {
    if (b.matrix) {
      u = ad::matmul(*b.matrix, u);
      total = ad::add(total, *b.matrix_log_det);
    }
    u = ad::add(ad::mul(u, ad::exp(b.log_scale)), b.shift);
    total = ad::add(total, ad::sum(b.log_scale));
    if (cfg.use_shiesh) {
      total = ad::add(total, ad::sum(ad::shiesh_log_derivative(u, cfg.shiesh_b)));
      u = ad::shiesh(u, cfg.shiesh_b);
    }
  }
  const ad::Var base = ad::add_scalar(ad::scale(ad::sum(ad::square(u)), -0.5), -0.5 * static_cast<double>(k) * kLogTwoPi);
  return ad::add(base, total);
}

/// njNLL of one instance on a tape: -(1/K) log p(y | .).
inline ad::Var njnll_loss(ParameterBinding& p, const Model& model, const SeriesInstance& inst) {
  const Conditioning c = condition(p, model, inst);
  return ad::scale(log_density(p, model, inst, c), -1.0 / static_cast<double>(inst.queries.size()));
}

// ---- evaluation path ---------------------------------------------------------

/// Plain-value copy of a Conditioning plus the instance's standardization.
struct FlowPlan {
  struct Block {
    std::optional<Tensor> matrix;
    AttentionKind kind = AttentionKind::Triangular;
    std::vector<double> log_scale;
    std::vector<double> shift;
  };

  Permutation order;
  std::vector<double> mean;  // per sorted position
  std::vector<double> stddev;
  std::vector<double> initial_shift;
  std::vector<Block> blocks;
  bool use_shiesh = true;
  double shiesh_b = 1.0;
  bool factorized = false;

  std::size_t size() const noexcept { return order.size(); }
};

inline FlowPlan make_plan(const Model& model, const SeriesInstance& inst, bool factorized = false) {
  ad::Tape tape(false);
  ParameterBinding p(tape, model.parameters());
  const Conditioning c = condition(p, model, inst, factorized);
  const ModelConfig& cfg = model.config();
  FlowPlan plan;
  plan.order = c.order;
  plan.use_shiesh = cfg.use_shiesh;
  plan.shiesh_b = cfg.shiesh_b;
  plan.factorized = factorized;
  for (std::size_t j = 0; j < c.order.size(); ++j) {
    const int ch = inst.queries[c.order[j]].channel;
    plan.mean.push_back(model.normalization().channel_mean[ch]);
    plan.stddev.push_back(model.normalization().channel_std[ch]);
  }
  plan.initial_shift = c.initial_shift.value().vector();
  for (const BlockConditioning& b : c.blocks) {
    FlowPlan::Block pb;
    if (b.matrix) pb.matrix = b.matrix->value();
    pb.kind = cfg.attention;
    pb.log_scale = b.log_scale.value().vector();
    pb.shift = b.shift.value().vector();
    plan.blocks.push_back(std::move(pb));
  }
  return plan;
}

struct LayerLogDet {
  std::string layer;
  double value = 0.0;
};

struct DensityResult {
  double log_density = 0.0;
  std::vector<double> z;  // latent, original query order
  std::vector<LayerLogDet> per_layer_logdets;
  std::vector<double> per_query_log_density;  // only meaningful for factorized plans
};

/// y (original order) -> z with every log-Jacobian term.
inline DensityResult evaluate(const FlowPlan& plan, std::span<const double> y) {
  const std::size_t k = plan.size();
  if (y.size() != k) throw ShapeError("density: " + std::to_string(y.size()) + " answers for " + std::to_string(k) + " queries");
  DensityResult r;
  std::vector<double> per_query(k, 0.0);
  std::vector<double> u(k);
  double ld = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    u[j] = (y[plan.order[j]] - plan.mean[j]) / plan.stddev[j];
    per_query[j] -= std::log(plan.stddev[j]);
    ld -= std::log(plan.stddev[j]);
  }
  r.per_layer_logdets.push_back({"standardize", ld});
  for (std::size_t j = 0; j < k; ++j) u[j] += plan.initial_shift[j];
  r.per_layer_logdets.push_back({"initial_shift", 0.0});

  auto check = [&](std::size_t block, const char* layer) {
    for (double v : u)
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value after " + std::string(layer) + " of block " + std::to_string(block));
      }
  };
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    const FlowPlan::Block& blk = plan.blocks[b];
    const std::string tag = "block" + std::to_string(b) + ".";
    if (blk.matrix) {
      u = matvec(*blk.matrix, u);
      const double lm = attention_log_det(blk.kind, *blk.matrix);
      r.per_layer_logdets.push_back({tag + "attention", lm});
      for (std::size_t j = 0; j < k; ++j) per_query[j] += std::log(std::abs((*blk.matrix)(j, j)));
      check(b, "attention");
    }
    double ls = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      u[j] = u[j] * std::exp(blk.log_scale[j]) + blk.shift[j];
      ls += blk.log_scale[j];
      per_query[j] += blk.log_scale[j];
    }
    r.per_layer_logdets.push_back({tag + "el", ls});
    check(b, "EL");
    if (plan.use_shiesh) {
      double lsh = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double t = std::log(shiesh_derivative(u[j], plan.shiesh_b));
        lsh += t;
        per_query[j] += t;
        u[j] = shiesh(u[j], plan.shiesh_b);
      }
      r.per_layer_logdets.push_back({tag + "shiesh", lsh});
      check(b, "Shiesh");
    }
  }
  double base = -0.5 * static_cast<double>(k) * kLogTwoPi;
  for (std::size_t j = 0; j < k; ++j) {
    base -= 0.5 * u[j] * u[j];
    per_query[j] += -0.5 * u[j] * u[j] - 0.5 * kLogTwoPi;
  }
  r.log_density = base;
  for (const LayerLogDet& l : r.per_layer_logdets) r.log_density += l.value;
  r.z.assign(k, 0.0);
  r.per_query_log_density.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    r.z[plan.order[j]] = u[j];
    r.per_query_log_density[plan.order[j]] = per_query[j];
  }
  return r;
}

/// z (original order) -> y (original order), the sampling direction.
inline std::vector<double> generate(const FlowPlan& plan, std::span<const double> z) {
  const std::size_t k = plan.size();
  if (z.size() != k) throw ShapeError("generate: latent of length " + std::to_string(z.size()) + " for " + std::to_string(k) + " queries");
  std::vector<double> u(k);
  for (std::size_t j = 0; j < k; ++j) u[j] = z[plan.order[j]];
  for (std::size_t b = plan.blocks.size(); b-- > 0;) {
    const FlowPlan::Block& blk = plan.blocks[b];
    if (plan.use_shiesh)
      for (double& v : u) v = shiesh_inverse(v, plan.shiesh_b);
    for (std::size_t j = 0; j < k; ++j) u[j] = (u[j] - blk.shift[j]) * std::exp(-blk.log_scale[j]);
    if (blk.matrix) u = attention_solve(blk.kind, *blk.matrix, u);
  }
  std::vector<double> y(k);
  for (std::size_t j = 0; j < k; ++j) y[plan.order[j]] = (u[j] - plan.initial_shift[j]) * plan.stddev[j] + plan.mean[j];
  return y;
}

// ---- model-level operations -----------------------------------------------------

/// f^{-1}: answers -> latent, with the exact log-density.
inline DensityResult inverse_transform(const Model& model, const SeriesInstance& inst, std::span<const double> y) {
  return evaluate(make_plan(model, inst), y);
}

/// f: latent -> answers.
inline std::vector<double> forward_transform(const Model& model, const SeriesInstance& inst, std::span<const double> z) {
  return generate(make_plan(model, inst), z);
}

/// n x K answer samples (original query order).
inline Tensor sample(const Model& model, const SeriesInstance& inst, std::size_t n, std::mt19937_64& rng) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  const FlowPlan plan = make_plan(model, inst);
  const std::size_t k = plan.size();
  std::normal_distribution<double> normal;
  Tensor out = Tensor::matrix(n, k);
  std::vector<double> z(k);
  for (std::size_t s = 0; s < n; ++s) {
    for (double& v : z) v = normal(rng);
    const auto y = generate(plan, z);
    for (std::size_t j = 0; j < k; ++j) out(s, j) = y[j];
  }
  return out;
}

/// njNLL contribution of one instance, -(1/K) log p(y | .).
inline double joint_density(const Model& model, const SeriesInstance& inst) {
  const DensityResult r = inverse_transform(model, inst, inst.answer_values());
  return -r.log_density / static_cast<double>(inst.queries.size());
}

/// Per-query marginal log-densities with the attention off-diagonals zeroed.
inline std::vector<double> marginal_log_densities(const Model& model, const SeriesInstance& inst) {
  return evaluate(make_plan(model, inst, true), inst.answer_values()).per_query_log_density;
}

/// Marginal NLL of query k, -log p(y_k | x^obs, x^qry_k).
inline double marginal_density(const Model& model, const SeriesInstance& inst, std::size_t k) {
  if (k >= inst.queries.size()) throw ShapeError("marginal_density: query index out of range");
  return -marginal_log_densities(model, inst)[k];
}

}  // namespace profiti
