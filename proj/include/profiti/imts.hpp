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
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "profiti/errors.hpp"
#include "profiti/tensor.hpp"

namespace profiti {

/// One observed event. Channels are 0-based.
struct Observation {
  double t = 0.0;
  int channel = 0;
  double value = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Query {
  double t = 0.0;
  int channel = 0;

  friend bool operator==(const Query&, const Query&) = default;
};

/// (x^obs, x^qry, y): past events, the queried (time, channel) pairs, and the answers.
struct SeriesInstance {
  std::string id;
  int channels = 0;
  std::vector<Observation> observations;
  std::vector<Query> queries;
  std::optional<std::vector<double>> answers;

  std::size_t num_queries() const noexcept { return queries.size(); }
  bool has_answers() const noexcept { return answers.has_value(); }
  const std::vector<double>& answer_values() const {
    if (!answers) throw DataError("series '" + id + "' has no answers");
    return *answers;
  }

  friend bool operator==(const SeriesInstance&, const SeriesInstance&) = default;
};

using Dataset = std::vector<SeriesInstance>;

/// Checks the IMTS invariants: unique triples and query pairs, channel range,
/// K >= 1, |answers| == K, and every query strictly after the last observation.
inline void validate_instance(const SeriesInstance& s) {
  const std::string who = "series '" + s.id + "'";
  if (s.channels < 1) throw DataError(who + ": channel count must be positive");
  if (s.queries.empty()) throw DataError(who + ": needs at least one query");
  if (s.answers && s.answers->size() != s.queries.size()) {
    throw DataError(who + ": " + std::to_string(s.answers->size()) + " answers for " +
                    std::to_string(s.queries.size()) + " queries");
  }
  std::set<std::tuple<double, int, double>> triples;
  double last_obs = -std::numeric_limits<double>::infinity();
  for (const Observation& o : s.observations) {
    if (o.channel < 0 || o.channel >= s.channels) {
      throw DataError(who + ": observation channel " + std::to_string(o.channel) + " outside [0, " +
                      std::to_string(s.channels) + ")");
    }
    if (!std::isfinite(o.t) || !std::isfinite(o.value)) throw DataError(who + ": non-finite observation");
    if (!triples.emplace(o.t, o.channel, o.value).second) throw DataError(who + ": duplicate observation triple");
    last_obs = std::max(last_obs, o.t);
  }
  std::set<std::pair<double, int>> pairs;
  for (const Query& q : s.queries) {
    if (q.channel < 0 || q.channel >= s.channels) {
      throw DataError(who + ": query channel " + std::to_string(q.channel) + " outside [0, " +
                      std::to_string(s.channels) + ")");
    }
    if (!std::isfinite(q.t)) throw DataError(who + ": non-finite query time");
    if (!pairs.emplace(q.t, q.channel).second) throw DataError(who + ": duplicate query pair");
    if (!(q.t > last_obs)) {
      throw DataError(who + ": query at t=" + std::to_string(q.t) +
                      " does not come after the last observation at t=" + std::to_string(last_obs));
    }
  }
  if (s.answers)
    for (double y : *s.answers)
      if (!std::isfinite(y)) throw DataError(who + ": non-finite answer");
}

/// Row permutation: position j of the permuted sequence holds element order[j].
using Permutation = std::vector<std::size_t>;

inline Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

inline Permutation invert_permutation(const Permutation& p) {
  Permutation inv(p.size(), p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] >= p.size() || inv[p[j]] != p.size()) throw DataError("not a permutation");
    inv[p[j]] = j;
  }
  return inv;
}

template <class T>
std::vector<T> apply_permutation(std::span<const T> v, const Permutation& p) {
  if (v.size() != p.size()) {
    throw ShapeError("apply_permutation: " + std::to_string(v.size()) + " elements, permutation of " +
                     std::to_string(p.size()));
  }
  std::vector<T> out;
  out.reserve(v.size());
  for (std::size_t j : p) out.push_back(v[j]);
  return out;
}

template <class T>
std::vector<T> apply_permutation(const std::vector<T>& v, const Permutation& p) {
  return apply_permutation(std::span<const T>(v), p);
}

/// Permutes the rows of a matrix.
inline Tensor apply_permutation(const Tensor& m, const Permutation& p) {
  if (m.rows() != p.size()) {
    throw ShapeError("apply_permutation: " + std::to_string(m.rows()) + " rows, permutation of " +
                     std::to_string(p.size()));
  }
  Tensor out(m.shape());
  for (std::size_t j = 0; j < p.size(); ++j)
    for (std::size_t c = 0; c < m.cols(); ++c) out(j, c) = m(p[j], c);
  return out;
}

/// 2x2 matrix S applied to the row (t, c) before a lexicographic argsort.
struct SortCriterion {
  std::array<double, 4> s{1.0, 0.0, 0.0, 1.0};  // row-major [[s0, s1], [s2, s3]]

  static SortCriterion identity() { return {}; }

  std::array<double, 2> apply(const Query& q) const {
    const double t = q.t, c = static_cast<double>(q.channel);
    return {t * s[0] + c * s[2], t * s[1] + c * s[3]};
  }

  friend bool operator==(const SortCriterion&, const SortCriterion&) = default;
};

/// Lexicographic argsort of (t, c) S. Ties keep the original order and raise a warning.
inline Permutation argsort_queries(std::span<const Query> queries, const SortCriterion& criterion = {}) {
  std::vector<std::array<double, 2>> keys;
  keys.reserve(queries.size());
  for (const Query& q : queries) keys.push_back(criterion.apply(q));
  Permutation order = identity_permutation(queries.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  for (std::size_t j = 1; j < order.size(); ++j) {
    if (keys[order[j - 1]] == keys[order[j]]) {
      warn("argsort_queries: tied sort keys; falling back to input order");
      break;
    }
  }
  return order;
}

inline Permutation argsort_queries(const std::vector<Query>& queries, const SortCriterion& criterion = {}) {
  return argsort_queries(std::span<const Query>(queries), criterion);
}

/// The same instance with queries (and answers) reordered by `p`.
inline SeriesInstance permute_queries(const SeriesInstance& s, const Permutation& p) {
  SeriesInstance out = s;
  out.queries = apply_permutation(s.queries, p);
  if (s.answers) out.answers = apply_permutation(*s.answers, p);
  return out;
}

inline std::size_t total_queries(std::span<const SeriesInstance> data) {
  std::size_t n = 0;
  for (const auto& s : data) n += s.queries.size();
  return n;
}

}  // namespace profiti
