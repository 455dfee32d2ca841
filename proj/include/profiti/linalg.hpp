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
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "profiti/errors.hpp"
#include "profiti/tensor.hpp"

namespace profiti::linalg {

/// LU factorization with partial pivoting, P A = L U, packed in one matrix.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Tensor& a) : lu_(a), pivots_(a.rows()) {
    if (a.rank() != 2 || a.rows() != a.cols()) {
      throw ShapeError("LU needs a square matrix, got " + to_string(a.shape()));
    }
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i) pivots_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(pivots_[k], pivots_[p]);
        sign_ = -sign_;
      }
      const double pivot = lu_(k, k);
      if (pivot == 0.0) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  bool singular() const noexcept { return singular_; }

  /// log|det A|; -inf for singular input.
  double log_abs_det() const {
    if (singular_) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (std::size_t i = 0; i < lu_.rows(); ++i) acc += std::log(std::abs(lu_(i, i)));
    return acc;
  }

  /// Sign of det A (0 when singular).
  int sign() const {
    if (singular_) return 0;
    int s = sign_;
    for (std::size_t i = 0; i < lu_.rows(); ++i)
      if (lu_(i, i) < 0) s = -s;
    return s;
  }

  double determinant() const { return singular_ ? 0.0 : sign() * std::exp(log_abs_det()); }

  std::vector<double> solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw ShapeError("LU solve: rhs length mismatch");
    if (singular_) throw NumericError("LU solve on a singular matrix");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[pivots_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  Tensor inverse() const {
    const std::size_t n = lu_.rows();
    Tensor inv = Tensor::matrix(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      std::fill(e.begin(), e.end(), 0.0);
      e[c] = 1.0;
      const auto col = solve(e);
      for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
    }
    return inv;
  }

 private:
  Tensor lu_;
  std::vector<std::size_t> pivots_;
  int sign_ = 1;
  bool singular_ = false;
};

inline double log_abs_det(const Tensor& a) { return LuDecomposition(a).log_abs_det(); }

/// Solves L x = b for lower-triangular L by forward substitution, O(K^2).
/// `multiply_adds`, when given, receives the number of inner-loop updates.
inline std::vector<double> forward_substitution(const Tensor& lower, std::span<const double> b,
                                                std::size_t* multiply_adds = nullptr) {
  const std::size_t n = lower.rows();
  if (lower.cols() != n || b.size() != n) {
    throw ShapeError("forward substitution: matrix " + to_string(lower.shape()) +
                     " with rhs of length " + std::to_string(b.size()));
  }
  std::size_t ops = 0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < i; ++j) acc -= lower(i, j) * x[j];
    ops += i;
    const double d = lower(i, i);
    if (d == 0.0) throw NumericError("forward substitution: zero diagonal at row " + std::to_string(i));
    x[i] = acc / d;
  }
  if (multiply_adds) *multiply_adds = ops;
  return x;
}

struct SpectralNorm {
  double value = 0.0;
  std::vector<double> left;   // u = A v / sigma
  std::vector<double> right;  // v, top eigenvector of A^T A
  std::size_t iterations = 0;
};

/// Largest singular value by power iteration on A^T A. Converged when the
/// relative change of the estimate drops below `tolerance`.
inline SpectralNorm spectral_norm(const Tensor& a, double tolerance = 1e-9,
                                  std::size_t max_iterations = 10000) {
  const std::size_t m = a.rows(), n = a.cols();
  SpectralNorm out;
  out.left.assign(m, 0.0);
  out.right.assign(n, 0.0);
  if (n == 0 || m == 0) return out;

  std::vector<double> v(n), av(m), w(n);
  // Deterministic, non-symmetric start so it is unlikely to be orthogonal to the top vector.
  double norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = 1.0 + 0.37 * static_cast<double>(j) / static_cast<double>(n);
    norm += v[j] * v[j];
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  double sigma = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * v[j];
      av[i] = acc;
    }
    double wn = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a(i, j) * av[i];
      w[j] = acc;
      wn += acc * acc;
    }
    wn = std::sqrt(wn);
    if (wn == 0.0) {
      // A v = 0 from a generic start: A is the zero matrix.
      out.iterations = it;
      return out;
    }
    // ||A^T A v|| -> sigma^2 as v aligns with the top right singular vector.
    const double next = std::sqrt(wn);
    for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / wn;
    const bool converged = it > 1 && std::abs(next - sigma) <= tolerance * next;
    sigma = next;
    if (converged) {
      out.iterations = it;
      break;
    }
    if (it == max_iterations) {
      throw NumericError("spectral norm: power iteration did not converge in " +
                         std::to_string(max_iterations) + " iterations");
    }
  }

  // Rayleigh quotient on the final vector is more accurate than the last norm ratio.
  double s2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * v[j];
    av[i] = acc;
    s2 += acc * acc;
  }
  out.value = std::sqrt(s2);
  out.right = v;
  if (out.value > 0.0)
    for (std::size_t i = 0; i < m; ++i) out.left[i] = av[i] / out.value;
  return out;
}

}  // namespace profiti::linalg
