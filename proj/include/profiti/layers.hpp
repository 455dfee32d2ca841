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

// Invertible flow layers: Shiesh (see shiesh.hpp), the elementwise linear
// layer, and attention matrices made invertible by construction.
//
// Attention layers act on a column vector z of length K: out = M(X) z, where
// M depends only on the condition matrix X (K x d). Three constructions:
//   triangular : strictly-lower scores, softplus(diag) + eps on the diagonal
//   regularized: A / (||A||_2 + eps) + I
//   itrans     : rowwise softmax(A) + I
// The triangular variant needs a canonical row order to stay equivariant, so
// SITA sorts rows by the queries before building M and unsorts afterwards.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "profiti/autodiff.hpp"
#include "profiti/errors.hpp"
#include "profiti/imts.hpp"
#include "profiti/linalg.hpp"
#include "profiti/tensor.hpp"

namespace profiti {

enum class AttentionKind { Triangular, Regularized, ITrans };

inline std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::Triangular:
      return "tri";
    case AttentionKind::Regularized:
      return "reg";
    case AttentionKind::ITrans:
      return "itrans";
  }
  return "?";
}

inline AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "tri") return AttentionKind::Triangular;
  if (s == "reg") return AttentionKind::Regularized;
  if (s == "itrans") return AttentionKind::ITrans;
  throw ConfigError("unknown attention kind '" + s + "' (expected tri, reg or itrans)");
}

// ---- small MLPs ------------------------------------------------------------

/// x -> tanh(x W1 + b1) W2 + b2, one scalar per row.
struct Mlp {
  Tensor w1;  // [d, h]
  Tensor b1;  // [1, h]
  Tensor w2;  // [h, 1]
  Tensor b2;  // [1, 1]

  double operator()(std::span<const double> x) const {
    const std::size_t d = w1.rows(), h = w1.cols();
    if (x.size() != d) throw ShapeError("mlp: input of length " + std::to_string(x.size()) + ", expected " + std::to_string(d));
    double out = b2[0];
    for (std::size_t j = 0; j < h; ++j) {
      double acc = b1[j];
      for (std::size_t i = 0; i < d; ++i) acc += x[i] * w1(i, j);
      out += std::tanh(acc) * w2(j, 0);
    }
    return out;
  }

  /// Evaluates every row of X: [K, d] -> K values.
  std::vector<double> rows(const Tensor& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t k = 0; k < x.rows(); ++k) out[k] = (*this)(x.values().subspan(k * x.cols(), x.cols()));
    return out;
  }
};

// ---- elementwise linear layer ----------------------------------------------

/// EL(y_k; x_k) = y_k * scale(x_k) + shift(x_k), scale = exp(tanh(NN_sca(x_k))) in [1/e, e].
struct ElementwiseLinear {
  Mlp scale_net;
  Mlp shift_net;
  bool unit_scale = false;  // slope pinned to 1 (the initial y-side layer)

  double log_scale(std::span<const double> x) const { return unit_scale ? 0.0 : std::tanh(scale_net(x)); }
  double scale(std::span<const double> x) const { return std::exp(log_scale(x)); }
  double shift(std::span<const double> x) const { return shift_net(x); }

  double forward(double y, std::span<const double> x) const { return y * scale(x) + shift(x); }
  double inverse(double v, std::span<const double> x) const { return (v - shift(x)) / scale(x); }
};

// ---- attention matrices ------------------------------------------------------

/// A = (X W_Q)(X W_K)^T.
inline Tensor attention_scores(const Tensor& x, const Tensor& query_proj, const Tensor& key_proj) {
  return matmul(matmul(x, query_proj), transpose(matmul(x, key_proj)));
}

inline Tensor regularized_attention(const Tensor& a, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("attention epsilon must be positive");
  const double norm = linalg::spectral_norm(a).value;
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) / (norm + epsilon) + (i == j ? 1.0 : 0.0);
  return out;
}

inline Tensor triangular_attention(const Tensor& a, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("attention epsilon must be positive");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) out(i, j) = a(i, j);
    out(i, i) = ad::softplus(a(i, i)) + epsilon;
  }
  return out;
}

inline Tensor itrans_attention(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) z += std::exp(a(i, j) - mx);
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = std::exp(a(i, j) - mx) / z + (i == j ? 1.0 : 0.0);
  }
  return out;
}

/// log|det| of a triangular matrix from its diagonal, O(K).
inline double triangular_log_det(const Tensor& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) acc += std::log(std::abs(m(i, i)));
  return acc;
}

inline Tensor attention_matrix(AttentionKind kind, const Tensor& scores, double epsilon) {
  switch (kind) {
    case AttentionKind::Triangular:
      return triangular_attention(scores, epsilon);
    case AttentionKind::Regularized:
      return regularized_attention(scores, epsilon);
    case AttentionKind::ITrans:
      return itrans_attention(scores);
  }
  throw ConfigError("unknown attention kind");
}

inline double attention_log_det(AttentionKind kind, const Tensor& m) {
  if (kind == AttentionKind::Triangular) return triangular_log_det(m);
  return linalg::log_abs_det(m);
}

/// Solves M x = b for an attention matrix: forward substitution for the
/// triangular kind, LU otherwise.
inline std::vector<double> attention_solve(AttentionKind kind, const Tensor& m, std::span<const double> b) {
  if (kind == AttentionKind::Triangular) return linalg::forward_substitution(m, b);
  return linalg::LuDecomposition(m).solve(b);
}

inline std::vector<double> matvec(const Tensor& m, std::span<const double> v) {
  if (m.cols() != v.size()) throw ShapeError("matvec: " + to_string(m.shape()) + " times vector of " + std::to_string(v.size()));
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m(i, j) * v[j];
  return out;
}

// ---- SITA ------------------------------------------------------------------

struct AttentionParams {
  Tensor query_proj;  // [d, d_a]
  Tensor key_proj;    // [d, d_a]
  double epsilon = 1e-5;
};

struct LayerOutput {
  std::vector<double> values;
  double log_det = 0.0;
};

/// SITA(z, X) = (A_tri(X^pi) z^pi)^{pi^-1} with pi the argsort of the queries under S.
inline LayerOutput sita_forward(std::span<const double> z, const Tensor& x, std::span<const Query> queries,
                                const SortCriterion& sort, const AttentionParams& params) {
  if (z.size() != queries.size() || x.rows() != queries.size()) {
    throw ShapeError("sita: " + std::to_string(z.size()) + " values, " + std::to_string(x.rows()) + " condition rows, " +
                     std::to_string(queries.size()) + " queries");
  }
  const Permutation pi = argsort_queries(queries, sort);
  const Tensor m = triangular_attention(attention_scores(apply_permutation(x, pi), params.query_proj, params.key_proj),
                                        params.epsilon);
  const std::vector<double> zs = apply_permutation(z, pi);
  const std::vector<double> ys = matvec(m, zs);
  LayerOutput out;
  out.values.resize(z.size());
  for (std::size_t j = 0; j < pi.size(); ++j) out.values[pi[j]] = ys[j];
  out.log_det = triangular_log_det(m);
  return out;
}

/// Inverse of sita_forward by forward substitution in sorted order; log_det is
/// that of the inverse map.
inline LayerOutput sita_inverse(std::span<const double> y, const Tensor& x, std::span<const Query> queries,
                                const SortCriterion& sort, const AttentionParams& params) {
  if (y.size() != queries.size() || x.rows() != queries.size()) throw ShapeError("sita: length mismatch");
  const Permutation pi = argsort_queries(queries, sort);
  const Tensor m = triangular_attention(attention_scores(apply_permutation(x, pi), params.query_proj, params.key_proj),
                                        params.epsilon);
  const std::vector<double> ys = apply_permutation(y, pi);
  const std::vector<double> zs = linalg::forward_substitution(m, ys);
  LayerOutput out;
  out.values.resize(y.size());
  for (std::size_t j = 0; j < pi.size(); ++j) out.values[pi[j]] = zs[j];
  out.log_det = -triangular_log_det(m);
  return out;
}

// ---- differentiable versions -------------------------------------------------

namespace ad {

inline Var attention_scores(const Var& x, const Var& query_proj, const Var& key_proj) {
  return matmul(matmul(x, query_proj), transpose(matmul(x, key_proj)));
}

/// Returns (M, log|det M|) for the chosen attention kind. With `diagonal_only`
/// the off-diagonal entries are dropped (factorized evaluation).
inline std::pair<Var, Var> attention_matrix(AttentionKind kind, const Var& scores, double epsilon,
                                            bool diagonal_only = false) {
  Tape& t = *scores.tape();
  const std::size_t k = scores.rows();
  const Var eye = t.constant(Tensor::identity(k));
  switch (kind) {
    case AttentionKind::Triangular: {
      const Var d = add_scalar(softplus(diag(scores)), epsilon);
      const Var logdet = sum(log(d));
      Var m = diag_embed(d);
      if (!diagonal_only) m = add(tril(scores, true), m);
      return {m, logdet};
    }
    case AttentionKind::Regularized: {
      if (!(epsilon > 0.0)) throw ConfigError("attention epsilon must be positive");
      const Var norm = add_scalar(spectral_norm(scores), epsilon);
      Var m = add(div(scores, norm), eye);
      if (diagonal_only) m = diag_embed(diag(m));
      return {m, logabsdet(m)};
    }
    case AttentionKind::ITrans: {
      Var m = add(softmax_rows(scores), eye);
      if (diagonal_only) m = diag_embed(diag(m));
      return {m, logabsdet(m)};
    }
  }
  throw ConfigError("unknown attention kind");
}

/// tanh(x W1 + b1) W2 + b2 over rows: [K, d] -> [K, 1].
inline Var mlp(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
  return add(matmul(tanh(add(matmul(x, w1), b1)), w2), b2);
}

}  // namespace ad

}  // namespace profiti
