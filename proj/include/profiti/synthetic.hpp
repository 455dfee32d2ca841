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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "profiti/errors.hpp"
#include "profiti/imts.hpp"

namespace profiti {

enum class ProcessFamily { GaussianOU, CorrelatedHeavyTail, Multimodal };

inline std::string to_string(ProcessFamily f) {
  switch (f) {
    case ProcessFamily::GaussianOU:
      return "gaussian-ou";
    case ProcessFamily::CorrelatedHeavyTail:
      return "correlated-heavytail";
    case ProcessFamily::Multimodal:
      return "multimodal";
  }
  return "?";
}

inline ProcessFamily parse_process_family(const std::string& s) {
  if (s == "gaussian-ou") return ProcessFamily::GaussianOU;
  if (s == "correlated-heavytail") return ProcessFamily::CorrelatedHeavyTail;
  if (s == "multimodal") return ProcessFamily::Multimodal;
  throw ConfigError("unknown process family '" + s + "'");
}

/// Synthetic IMTS drawn from a latent C-dimensional Ornstein-Uhlenbeck process
/// with equicorrelated channels, sampled at random event times with random
/// channel dropout. Values are the latent itself (gaussian-ou), its sinh
/// (correlated-heavytail) or the latent pushed away from its mean by
/// +-mode_shift (multimodal).
struct SyntheticSpec {
  std::size_t num_series = 1000;
  int channels = 3;
  double observation_window = 8.0;
  double forecast_horizon = 2.0;
  double event_rate = 1.5;  // expected event times per unit time
  double missing_fraction = 0.3;
  std::size_t max_queries = 8;
  ProcessFamily family = ProcessFamily::CorrelatedHeavyTail;
  double mean_reversion = 0.5;
  double noise = 1.0;        // stationary standard deviation of the latent
  double correlation = 0.8;  // cross-channel correlation of the latent
  double mode_shift = 1.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (channels < 1) throw ConfigError("synthetic: channels must be >= 1");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
      throw ConfigError("synthetic: missing fraction must lie in [0, 1), got " + std::to_string(missing_fraction));
    }
    if (!(observation_window > 0.0) || !(forecast_horizon > 0.0)) throw ConfigError("synthetic: windows must be positive");
    if (!(event_rate > 0.0)) throw ConfigError("synthetic: event rate must be positive");
    if (max_queries < 1) throw ConfigError("synthetic: max_queries must be >= 1");
    if (!(noise >= 0.0)) throw ConfigError("synthetic: noise must be non-negative");
    if (!(mean_reversion > 0.0)) throw ConfigError("synthetic: mean reversion must be positive");
    const double lo = channels > 1 ? -1.0 / (channels - 1) : -1.0;
    if (!(correlation > lo && correlation < 1.0)) {
      throw ConfigError("synthetic: correlation " + std::to_string(correlation) +
                        " does not give a positive definite equicorrelation matrix");
    }
  }

  double channel_mean(int c) const { return 0.25 * (c - 0.5 * (channels - 1)); }
};

namespace detail {

// Cholesky factor of the equicorrelation matrix (1 - rho) I + rho 1 1^T.
inline std::vector<double> equicorrelation_cholesky(int n, double rho) {
  std::vector<double> l(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = i == j ? 1.0 : rho;
      for (int k = 0; k < j; ++k) acc -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = i == j ? std::sqrt(acc) : acc / l[j * n + j];
    }
  }
  return l;
}

inline std::vector<double> correlated_normal(std::mt19937_64& rng, const std::vector<double>& chol, int n) {
  std::normal_distribution<double> normal;
  std::vector<double> e(n), out(n, 0.0);
  for (double& x : e) x = normal(rng);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k <= i; ++k) out[i] += chol[i * n + k] * e[k];
  return out;
}

inline double emit_value(const SyntheticSpec& spec, int channel, double latent) {
  switch (spec.family) {
    case ProcessFamily::GaussianOU:
      return latent;
    case ProcessFamily::CorrelatedHeavyTail:
      return std::sinh(latent);
    case ProcessFamily::Multimodal: {
      const double d = latent - spec.channel_mean(channel);
      return latent + (d > 0 ? spec.mode_shift : (d < 0 ? -spec.mode_shift : 0.0));
    }
  }
  return latent;
}

}  // namespace detail

inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int C = spec.channels;
  const auto chol = detail::equicorrelation_cholesky(C, spec.correlation);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<int> n_obs_times(spec.event_rate * spec.observation_window);
  std::poisson_distribution<int> n_qry_times(spec.event_rate * spec.forecast_horizon);
  std::bernoulli_distribution observed(1.0 - spec.missing_fraction);

  Dataset data;
  data.reserve(spec.num_series);
  for (std::size_t n = 0; n < spec.num_series; ++n) {
    std::vector<double> obs_times(static_cast<std::size_t>(std::max(1, n_obs_times(rng))));
    for (double& t : obs_times) t = spec.observation_window * unit(rng);
    std::vector<double> qry_times(static_cast<std::size_t>(std::max(1, n_qry_times(rng))));
    for (double& t : qry_times) t = spec.observation_window + spec.forecast_horizon * (1.0 - unit(rng));
    std::sort(obs_times.begin(), obs_times.end());
    std::sort(qry_times.begin(), qry_times.end());

    // Exact OU transitions between consecutive event times, stationary start.
    std::vector<double> times = obs_times;
    times.insert(times.end(), qry_times.begin(), qry_times.end());
    std::vector<std::vector<double>> latent(times.size(), std::vector<double>(C));
    std::vector<double> x(C);
    {
      const auto e = detail::correlated_normal(rng, chol, C);
      for (int c = 0; c < C; ++c) x[c] = spec.channel_mean(c) + spec.noise * e[c];
    }
    double prev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double decay = std::exp(-spec.mean_reversion * (times[k] - prev));
      const double sd = spec.noise * std::sqrt(1.0 - decay * decay);
      const auto e = detail::correlated_normal(rng, chol, C);
      for (int c = 0; c < C; ++c) {
        const double mu = spec.channel_mean(c);
        x[c] = mu + (x[c] - mu) * decay + sd * e[c];
      }
      latent[k] = x;
      prev = times[k];
    }

    SeriesInstance s;
    s.id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(n);
    s.channels = C;
    for (std::size_t k = 0; k < obs_times.size(); ++k)
      for (int c = 0; c < C; ++c)
        if (observed(rng)) s.observations.push_back({times[k], c, detail::emit_value(spec, c, latent[k][c])});
    if (s.observations.empty()) {
      const std::size_t k = static_cast<std::size_t>(unit(rng) * obs_times.size()) % obs_times.size();
      const int c = static_cast<int>(unit(rng) * C) % C;
      s.observations.push_back({times[k], c, detail::emit_value(spec, c, latent[k][c])});
    }

    std::vector<std::pair<Query, double>> qa;
    for (std::size_t k = 0; k < qry_times.size(); ++k) {
      const std::size_t row = obs_times.size() + k;
      for (int c = 0; c < C; ++c)
        if (observed(rng)) qa.push_back({Query{times[row], c}, detail::emit_value(spec, c, latent[row][c])});
    }
    if (qa.empty()) {
      const std::size_t k = static_cast<std::size_t>(unit(rng) * qry_times.size()) % qry_times.size();
      const std::size_t row = obs_times.size() + k;
      const int c = static_cast<int>(unit(rng) * C) % C;
      qa.push_back({Query{times[row], c}, detail::emit_value(spec, c, latent[row][c])});
    }
    // Random subset and random presentation order; the model must not rely on it.
    std::shuffle(qa.begin(), qa.end(), rng);
    if (qa.size() > spec.max_queries) qa.resize(spec.max_queries);
    std::vector<double> answers;
    for (const auto& [q, y] : qa) {
      s.queries.push_back(q);
      answers.push_back(y);
    }
    s.answers = std::move(answers);
    data.push_back(std::move(s));
  }
  return data;
}

/// Monte-Carlo correlation matrix (C x C, row-major) of the stationary latent,
/// for checking the generator against its configured correlation.
inline std::vector<double> sample_latent_correlation(const SyntheticSpec& spec, std::size_t samples,
                                                     std::uint64_t seed) {
  spec.validate();
  if (!(spec.noise > 0.0)) throw ConfigError("latent correlation is undefined without noise");
  const int C = spec.channels;
  const auto chol = detail::equicorrelation_cholesky(C, spec.correlation);
  std::mt19937_64 rng(seed);
  std::vector<double> sum(C, 0.0), cross(static_cast<std::size_t>(C * C), 0.0);
  for (std::size_t n = 0; n < samples; ++n) {
    auto e = detail::correlated_normal(rng, chol, C);
    for (int i = 0; i < C; ++i) {
      const double xi = spec.channel_mean(i) + spec.noise * e[i];
      e[i] = xi;
      sum[i] += xi;
    }
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j) cross[i * C + j] += e[i] * e[j];
  }
  const double n = static_cast<double>(samples);
  std::vector<double> corr(static_cast<std::size_t>(C * C));
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < C; ++j) {
      const double cov_ij = cross[i * C + j] / n - sum[i] * sum[j] / (n * n);
      const double var_i = cross[i * C + i] / n - sum[i] * sum[i] / (n * n);
      const double var_j = cross[j * C + j] / n - sum[j] * sum[j] / (n * n);
      corr[i * C + j] = cov_ij / std::sqrt(var_i * var_j);
    }
  return corr;
}

}  // namespace profiti
