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

// Query encoder: maps (x^obs, x^qry) to one condition row per query.
//
// Observation tokens embed (time features, channel embedding, projected value).
// Query tokens embed (time features, channel embedding) and then cross-attend
// over the observation tokens for a few residual rounds. Every query row is
// computed from its own token and the shared observation set, so permuting
// queries permutes rows and nothing else.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "profiti/autodiff.hpp"
#include "profiti/errors.hpp"
#include "profiti/imts.hpp"
#include "profiti/parameters.hpp"

namespace profiti {

struct EncoderConfig {
  std::size_t model_dim = 64;
  std::size_t time_features = 16;  // sinusoid features; the raw time is appended
  std::size_t channel_dim = 8;
  std::size_t value_dim = 8;
  std::size_t heads = 2;
  std::size_t layers = 2;
  double min_period = 0.5;
  double max_period = 200.0;

  void validate() const {
    if (model_dim == 0 || heads == 0 || model_dim % heads != 0) {
      throw ConfigError("encoder: model_dim must be a positive multiple of heads");
    }
    if (time_features % 2 != 0) throw ConfigError("encoder: time_features must be even");
    if (!(min_period > 0.0) || !(max_period >= min_period)) throw ConfigError("encoder: bad period range");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Standardization fitted on training data and stored with the model.
struct NormalizationStats {
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  double time_offset = 0.0;
  double time_scale = 1.0;

  static NormalizationStats identity(int channels) {
    NormalizationStats s;
    s.channel_mean.assign(static_cast<std::size_t>(channels), 0.0);
    s.channel_std.assign(static_cast<std::size_t>(channels), 1.0);
    return s;
  }

  double standardize(int channel, double value) const {
    return (value - channel_mean.at(static_cast<std::size_t>(channel))) / channel_std.at(static_cast<std::size_t>(channel));
  }
  double time(double t) const { return (t - time_offset) / time_scale; }

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Per-channel mean/std over observations and answers, and time offset/scale
/// over all timestamps.
inline NormalizationStats fit_normalization(std::span<const SeriesInstance> data, int channels) {
  NormalizationStats s = NormalizationStats::identity(channels);
  std::vector<double> n(channels, 0.0), sum(channels, 0.0), sq(channels, 0.0);
  double tn = 0.0, tsum = 0.0, tsq = 0.0;
  auto add = [&](int c, double v) {
    n[c] += 1.0;
    sum[c] += v;
    sq[c] += v * v;
  };
  auto add_t = [&](double t) {
    tn += 1.0;
    tsum += t;
    tsq += t * t;
  };
  for (const SeriesInstance& inst : data) {
    for (const Observation& o : inst.observations) {
      add(o.channel, o.value);
      add_t(o.t);
    }
    for (std::size_t k = 0; k < inst.queries.size(); ++k) {
      add_t(inst.queries[k].t);
      if (inst.answers) add(inst.queries[k].channel, (*inst.answers)[k]);
    }
  }
  for (int c = 0; c < channels; ++c) {
    if (n[c] < 2) continue;
    const double m = sum[c] / n[c];
    const double var = sq[c] / n[c] - m * m;
    s.channel_mean[c] = m;
    s.channel_std[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  if (tn >= 2) {
    const double m = tsum / tn;
    const double var = tsq / tn - m * m;
    s.time_offset = m;
    s.time_scale = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

/// [sin(w_j t)]_j, [cos(w_j t)]_j, t with periods geometric in [min_period, max_period].
inline std::vector<double> time_encoding(double t, const EncoderConfig& cfg) {
  const std::size_t f = cfg.time_features / 2;
  std::vector<double> out(cfg.time_features + 1);
  for (std::size_t j = 0; j < f; ++j) {
    const double frac = f > 1 ? static_cast<double>(j) / static_cast<double>(f - 1) : 0.0;
    const double period = cfg.min_period * std::pow(cfg.max_period / cfg.min_period, frac);
    const double w = 2.0 * M_PI / period;
    out[j] = std::sin(w * t);
    out[f + j] = std::cos(w * t);
  }
  out[cfg.time_features] = t;
  return out;
}

namespace detail {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

inline Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return random_matrix(rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)), rng);
}

}  // namespace detail

inline void register_encoder_parameters(ParameterStore& store, const EncoderConfig& cfg, int channels,
                                        std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t tf = cfg.time_features + 1;
  store.add("encoder.channel_embedding", detail::random_matrix(static_cast<std::size_t>(channels), cfg.channel_dim, 1.0, rng));
  store.add("encoder.value.w", detail::random_matrix(1, cfg.value_dim, 1.0, rng));
  store.add("encoder.value.b", Tensor::matrix(1, cfg.value_dim));
  store.add("encoder.obs_in.w", detail::glorot(tf + cfg.channel_dim + cfg.value_dim, d, rng));
  store.add("encoder.obs_in.b", Tensor::matrix(1, d));
  store.add("encoder.query_in.w", detail::glorot(tf + cfg.channel_dim, d, rng));
  store.add("encoder.query_in.b", Tensor::matrix(1, d));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    store.add(p + "wq", detail::glorot(d, d, rng));
    store.add(p + "wk", detail::glorot(d, d, rng));
    store.add(p + "wv", detail::glorot(d, d, rng));
    store.add(p + "wo", detail::random_matrix(d, d, 0.5 / std::sqrt(static_cast<double>(d)), rng));
    store.add(p + "ff1.w", detail::glorot(d, d, rng));
    store.add(p + "ff1.b", Tensor::matrix(1, d));
    store.add(p + "ff2.w", detail::random_matrix(d, d, 0.5 / std::sqrt(static_cast<double>(d)), rng));
    store.add(p + "ff2.b", Tensor::matrix(1, d));
  }
}

namespace detail {

inline void check_channels(std::span<const Observation> obs, int channels) {
  for (const Observation& o : obs)
    if (o.channel < 0 || o.channel >= channels) {
      throw DataError("encoder: observation channel " + std::to_string(o.channel) + " outside [0, " +
                      std::to_string(channels) + ")");
    }
}

inline Tensor time_matrix(std::span<const double> times, const EncoderConfig& cfg, const NormalizationStats& stats) {
  Tensor out = Tensor::matrix(times.size(), cfg.time_features + 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto enc = time_encoding(stats.time(times[i]), cfg);
    for (std::size_t j = 0; j < enc.size(); ++j) out(i, j) = enc[j];
  }
  return out;
}

}  // namespace detail

/// Observation tokens, [I, d].
inline ad::Var encode_observations(ParameterBinding& p, const EncoderConfig& cfg, const NormalizationStats& stats,
                                   std::span<const Observation> obs, int channels) {
  if (obs.empty()) throw DataError("encoder: needs at least one observation");
  detail::check_channels(obs, channels);
  ad::Tape& t = p.tape();
  std::vector<double> times, values;
  std::vector<std::size_t> chans;
  for (const Observation& o : obs) {
    times.push_back(o.t);
    values.push_back(stats.standardize(o.channel, o.value));
    chans.push_back(static_cast<std::size_t>(o.channel));
  }
  const ad::Var time_feats = t.constant(detail::time_matrix(times, cfg, stats));
  const ad::Var chan = ad::gather_rows(p("encoder.channel_embedding"), chans);
  const ad::Var value = ad::add(ad::matmul(t.constant(Tensor::column(values)), p("encoder.value.w")), p("encoder.value.b"));
  const ad::Var tokens = ad::concat_cols({time_feats, chan, value});
  return ad::tanh(ad::add(ad::matmul(tokens, p("encoder.obs_in.w")), p("encoder.obs_in.b")));
}

/// Condition matrix X, [K, d]; row k depends only on query k and the observation set.
inline ad::Var encode_queries(ParameterBinding& p, const EncoderConfig& cfg, const NormalizationStats& stats,
                              std::span<const Observation> obs, std::span<const Query> queries, int channels) {
  if (queries.empty()) throw DataError("encoder: needs at least one query");
  for (const Query& q : queries)
    if (q.channel < 0 || q.channel >= channels) {
      throw DataError("encoder: query channel " + std::to_string(q.channel) + " outside [0, " + std::to_string(channels) + ")");
    }
  const ad::Var obs_tokens = encode_observations(p, cfg, stats, obs, channels);
  ad::Tape& t = p.tape();

  std::vector<double> times;
  std::vector<std::size_t> chans;
  for (const Query& q : queries) {
    times.push_back(q.t);
    chans.push_back(static_cast<std::size_t>(q.channel));
  }
  const ad::Var time_feats = t.constant(detail::time_matrix(times, cfg, stats));
  const ad::Var chan = ad::gather_rows(p("encoder.channel_embedding"), chans);
  ad::Var h = ad::tanh(ad::add(ad::matmul(ad::concat_cols({time_feats, chan}), p("encoder.query_in.w")),
                               p("encoder.query_in.b")));

  const std::size_t d = cfg.model_dim;
  const std::size_t dh = d / cfg.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    const ad::Var q = ad::matmul(h, p(pre + "wq"));
    const ad::Var k = ad::matmul(obs_tokens, p(pre + "wk"));
    const ad::Var v = ad::matmul(obs_tokens, p(pre + "wv"));
    std::vector<ad::Var> heads;
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      const ad::Var qh = ad::slice_cols(q, hd * dh, (hd + 1) * dh);
      const ad::Var kh = ad::slice_cols(k, hd * dh, (hd + 1) * dh);
      const ad::Var vh = ad::slice_cols(v, hd * dh, (hd + 1) * dh);
      const ad::Var weights = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
      heads.push_back(ad::matmul(weights, vh));
    }
    const ad::Var attended = heads.size() == 1 ? heads.front() : ad::concat_cols(std::span<const ad::Var>(heads));
    h = ad::add(h, ad::matmul(attended, p(pre + "wo")));
    const ad::Var ff = ad::add(ad::matmul(ad::tanh(ad::add(ad::matmul(h, p(pre + "ff1.w")), p(pre + "ff1.b"))),
                                          p(pre + "ff2.w")),
                               p(pre + "ff2.b"));
    h = ad::add(h, ff);
  }
  return h;
}

}  // namespace profiti
