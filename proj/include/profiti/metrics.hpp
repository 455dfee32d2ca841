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

// Forecast scores. Density scores (njNLL, mNLL) come from the flow directly;
// CRPS and MSE use model samples.
//
// CRPS uses the V-statistic estimator
//   mean_i |x_i - y| - 1/2 mean_{i,j} |x_i - x_j|
// and the robust mean drops samples outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR] with
// linearly interpolated quantiles.
//
// njNLL averages -(1/K) log p per instance. mNLL divides the summed per-query
// negative log-densities by the total number of queries, so instances with
// more queries weigh more. The two agree when every instance has K = 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "profiti/errors.hpp"
#include "profiti/imts.hpp"
#include "profiti/model.hpp"
#include "profiti/parallel.hpp"

namespace profiti {

/// Linearly interpolated quantile of ascending `sorted`, p in [0, 1].
inline double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double crps_from_samples(std::span<const double> samples, double y) {
  if (samples.empty()) throw DomainError("CRPS needs at least one sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double fit = 0.0;
  for (double v : x) fit += std::abs(v - y);
  // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - n + 1) x_(i) for sorted x.
  double spread = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) spread += (2.0 * static_cast<double>(i) - n + 1.0) * x[i];
  spread *= 2.0;
  return fit / n - 0.5 * spread / (n * n);
}

/// Mean of the samples inside the Tukey fences; plain mean when none remain.
inline double robust_mean(std::span<const double> samples, bool* fell_back = nullptr) {
  if (samples.empty()) throw DomainError("robust mean of an empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double q1 = quantile(x, 0.25);
  const double q3 = quantile(x, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;
  double sum = 0.0;
  std::size_t kept = 0;
  for (double v : x) {
    if (v >= lo && v <= hi) {
      sum += v;
      ++kept;
    }
  }
  if (fell_back) *fell_back = kept == 0;
  if (kept == 0) {
    warn("robust mean: every sample is outside the fences, using the plain mean");
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
  }
  return sum / static_cast<double>(kept);
}

inline double robust_squared_error(std::span<const double> samples, double y) {
  const double m = robust_mean(samples);
  return (m - y) * (m - y);
}

namespace detail {

inline void require_answers(const Dataset& data, const char* what) {
  if (data.empty()) throw DataError(std::string(what) + ": empty dataset");
  for (const auto& inst : data)
    if (!inst.has_answers()) throw DataError(std::string(what) + ": series '" + inst.id + "' has no answers");
}

/// Independent stream for instance `index` under master seed `seed`.
inline std::mt19937_64 instance_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

inline double njnll(const Dataset& data, const Model& model, std::size_t threads = 1) {
  detail::require_answers(data, "njNLL");
  std::vector<double> per(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { per[i] = joint_density(model, data[i]); });
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(data.size());
}

inline double mnll(const Dataset& data, const Model& model, std::size_t threads = 1) {
  detail::require_answers(data, "mNLL");
  std::vector<double> per(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    double s = 0.0;
    for (double v : marginal_log_densities(model, data[i])) s -= v;
    per[i] = s;
  });
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(total_queries(data));
}

struct SampleScores {
  double crps = 0.0;
  double mse = 0.0;
};

/// Mean CRPS and robust-mean MSE over all queries, from `n_samples` draws per
/// instance.
inline SampleScores sample_scores(const Dataset& data, const Model& model, std::size_t n_samples, std::uint64_t seed,
                                  std::size_t threads = 1) {
  detail::require_answers(data, "sample scores");
  if (n_samples < 4) throw ConfigError("sample scores need n_samples >= 4");
  std::vector<SampleScores> per(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    std::mt19937_64 rng = detail::instance_rng(seed, i);
    const Tensor s = sample(model, data[i], n_samples, rng);
    const auto& y = data[i].answer_values();
    std::vector<double> column(n_samples);
    for (std::size_t k = 0; k < y.size(); ++k) {
      for (std::size_t r = 0; r < n_samples; ++r) column[r] = s(r, k);
      per[i].crps += crps_from_samples(column, y[k]);
      per[i].mse += robust_squared_error(column, y[k]);
    }
  });
  SampleScores out;
  for (const auto& p : per) {
    out.crps += p.crps;
    out.mse += p.mse;
  }
  const double q = static_cast<double>(total_queries(data));
  out.crps /= q;
  out.mse /= q;
  return out;
}

inline double crps(const Dataset& data, const Model& model, std::size_t n_samples, std::uint64_t seed) {
  return sample_scores(data, model, n_samples, seed).crps;
}

inline double mse_robust(const Dataset& data, const Model& model, std::size_t n_samples, std::uint64_t seed) {
  return sample_scores(data, model, n_samples, seed).mse;
}

struct MetricValue {
  double mean = 0.0;
  double std = 0.0;
  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct MetricReport {
  MetricValue njnll, mnll, crps, mse;
  std::size_t instances = 0;
  std::size_t queries = 0;
  std::size_t folds = 1;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct QueryRecord {
  std::string series;
  std::size_t query = 0;
  double t = 0.0;
  int channel = 0;
  double answer = 0.0;
  double marginal_nll = 0.0;
  double crps = 0.0;
  double robust_mean = 0.0;
  double sample_q05 = 0.0;
  double sample_q95 = 0.0;
};

struct EvaluateOptions {
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool per_query = false;
};

struct Evaluation {
  MetricReport report;
  std::vector<QueryRecord> queries;  // filled when options.per_query
};

/// Every metric on one dataset in a single pass.
inline Evaluation evaluate(const Model& model, const Dataset& data, const EvaluateOptions& options = {}) {
  detail::require_answers(data, "evaluate");
  if (options.n_samples < 4) throw ConfigError("evaluate: n_samples must be >= 4");
  struct Per {
    double joint = 0.0, marginal = 0.0, crps = 0.0, mse = 0.0;
    std::vector<QueryRecord> rows;
  };
  std::vector<Per> per(data.size());
  parallel_for(data.size(), options.threads, [&](std::size_t i) {
    const SeriesInstance& inst = data[i];
    const auto& y = inst.answer_values();
    Per& p = per[i];
    p.joint = joint_density(model, inst);
    const std::vector<double> marg = marginal_log_densities(model, inst);
    std::mt19937_64 rng = detail::instance_rng(options.seed, i);
    const Tensor s = sample(model, inst, options.n_samples, rng);
    std::vector<double> column(options.n_samples);
    for (std::size_t k = 0; k < y.size(); ++k) {
      for (std::size_t r = 0; r < options.n_samples; ++r) column[r] = s(r, k);
      const double c = crps_from_samples(column, y[k]);
      const double m = robust_mean(column);
      p.marginal -= marg[k];
      p.crps += c;
      p.mse += (m - y[k]) * (m - y[k]);
      if (options.per_query) {
        std::sort(column.begin(), column.end());
        p.rows.push_back({inst.id, k, inst.queries[k].t, inst.queries[k].channel, y[k], -marg[k], c, m,
                          quantile(column, 0.05), quantile(column, 0.95)});
      }
    }
  });
  Evaluation out;
  double joint = 0.0, marginal = 0.0, cr = 0.0, mse = 0.0;
  for (auto& p : per) {
    joint += p.joint;
    marginal += p.marginal;
    cr += p.crps;
    mse += p.mse;
    for (auto& r : p.rows) out.queries.push_back(std::move(r));
  }
  const double q = static_cast<double>(total_queries(data));
  out.report.instances = data.size();
  out.report.queries = total_queries(data);
  out.report.njnll.mean = joint / static_cast<double>(data.size());
  out.report.mnll.mean = marginal / q;
  out.report.crps.mean = cr / q;
  out.report.mse.mean = mse / q;
  return out;
}

/// Mean and sample standard deviation of each metric across folds.
inline MetricReport combine_folds(std::span<const MetricReport> folds) {
  if (folds.empty()) throw DataError("combine_folds: no folds");
  MetricReport out;
  out.folds = folds.size();
  auto combine = [&](MetricValue MetricReport::*field) {
    double m = 0.0;
    for (const auto& f : folds) m += (f.*field).mean;
    m /= static_cast<double>(folds.size());
    double v = 0.0;
    for (const auto& f : folds) v += ((f.*field).mean - m) * ((f.*field).mean - m);
    const double sd = folds.size() > 1 ? std::sqrt(v / static_cast<double>(folds.size() - 1)) : 0.0;
    return MetricValue{m, sd};
  };
  out.njnll = combine(&MetricReport::njnll);
  out.mnll = combine(&MetricReport::mnll);
  out.crps = combine(&MetricReport::crps);
  out.mse = combine(&MetricReport::mse);
  for (const auto& f : folds) {
    out.instances += f.instances;
    out.queries += f.queries;
  }
  return out;
}

}  // namespace profiti
