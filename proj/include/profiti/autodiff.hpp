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

// Tape-based reverse-mode differentiation over dense tensors.
//
// Every op appends one node to a Tape. Nodes are created after their inputs,
// so the creation order is a topological order and backward() is a single
// reverse sweep. A tape belongs to one thread; independent instances get
// independent tapes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "profiti/errors.hpp"
#include "profiti/linalg.hpp"
#include "profiti/shiesh.hpp"
#include "profiti/tensor.hpp"

namespace profiti::ad {

#ifdef NDEBUG
inline constexpr bool kValidateByDefault = false;
#else
inline constexpr bool kValidateByDefault = true;
#endif

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool validate = kValidateByDefault) : validate_(validate) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var constant(Tensor value) { return push(std::move(value), "constant", nullptr, false, -1); }

  /// Differentiable input not tied to a parameter (e.g. the answer vector).
  Var variable(Tensor value) { return push(std::move(value), "variable", nullptr, true, -1); }

  /// Leaf bound to parameter `index` of some ParameterStore.
  Var parameter(Tensor value, std::size_t index) {
    return push(std::move(value), "parameter", nullptr, true, static_cast<long>(index));
  }

  /// Appends an op result. `backward` reads grad(self) and accumulates into parents.
  Var record(Tensor value, const char* op, Backward backward, std::initializer_list<Var> inputs) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v.id());
    return push(std::move(value), op, needs ? std::move(backward) : nullptr, needs, -1);
  }
  Var record(Tensor value, const char* op, Backward backward, std::span<const Var> inputs) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v.id());
    return push(std::move(value), op, needs ? std::move(backward) : nullptr, needs, -1);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool validating() const noexcept { return validate_; }

  /// Gradient accumulator of node `id`, allocated as zeros on first touch.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape(), 0.0);
      n.has_grad = true;
    }
    return n.grad;
  }

  /// Gradient after backward(), or nullptr if nothing flowed into the node.
  const Tensor* gradient(const Var& v) const {
    const Node& n = nodes_[v.id()];
    return n.has_grad ? &n.grad : nullptr;
  }

  void zero_grad() {
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
  }

  /// Reverse sweep from a scalar loss.
  void backward(const Var& loss) {
    if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
    if (value(loss.id()).size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + to_string(value(loss.id()).shape()));
    }
    grad(loss.id()).fill(1.0);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, id);
    }
  }

  /// Calls f(parameter_index, gradient) for every parameter leaf that got a gradient.
  template <class F>
  void for_each_parameter_gradient(F&& f) const {
    for (const Node& n : nodes_)
      if (n.param >= 0 && n.has_grad) f(static_cast<std::size_t>(n.param), n.grad);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    const char* op = "";
    long param = -1;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var push(Tensor value, const char* op, Backward backward, bool requires_grad, long param) {
    if (validate_ && !value.all_finite()) {
      throw NumericError(std::string("op '") + op + "' produced non-finite values");
    }
    Node n;
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.op = op;
    n.param = param;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool validate_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw Error("operands live on different tapes");
  return *a.tape();
}

// Broadcasting for elementwise binary ops: equal shapes, a scalar operand, or a
// [1, n] row operand against an [m, n] matrix.
enum class Role { Full, Row, Scalar };

struct Broadcast {
  Shape out;
  Role a = Role::Full;
  Role b = Role::Full;
  std::size_t cols = 1;
};

inline Broadcast broadcast(const char* op, const Tensor& a, const Tensor& b) {
  Broadcast bc;
  if (a.shape() == b.shape()) {
    bc.out = a.shape();
  } else if (b.size() == 1) {
    bc.out = a.shape();
    bc.b = Role::Scalar;
  } else if (a.size() == 1) {
    bc.out = b.shape();
    bc.a = Role::Scalar;
  } else if (a.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) {
    bc.out = a.shape();
    bc.b = Role::Row;
  } else if (b.rank() == 2 && a.rows() == 1 && a.cols() == b.cols()) {
    bc.out = b.shape();
    bc.a = Role::Row;
  } else {
    throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  bc.cols = bc.out.empty() ? 1 : bc.out.back();
  return bc;
}

inline std::size_t source_index(Role r, std::size_t i, std::size_t cols) {
  switch (r) {
    case Role::Full:
      return i;
    case Role::Row:
      return i % cols;
    case Role::Scalar:
      return 0;
  }
  return i;
}

// f(a, b) -> value; da(a, b, out) and db(a, b, out) -> partial derivatives.
template <class F, class Da, class Db>
Var binary(const char* name, const Var& x, const Var& y, F f, Da da, Db db) {
  Tape& t = same_tape(x, y);
  const Tensor& a = x.value();
  const Tensor& b = y.value();
  const Broadcast bc = broadcast(name, a, b);
  Tensor out(bc.out);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = f(a[source_index(bc.a, i, bc.cols)], b[source_index(bc.b, i, bc.cols)]);
  const std::size_t ia = x.id(), ib = y.id();
  return t.record(
      std::move(out), name,
      [ia, ib, bc, da, db](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(ia);
        const Tensor& bv = tp.value(ib);
        const Tensor& ov = tp.value(self);
        if (tp.requires_grad(ia)) {
          Tensor& ga = tp.grad(ia);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t sa = source_index(bc.a, i, bc.cols);
            const std::size_t sb = source_index(bc.b, i, bc.cols);
            ga[sa] += g[i] * da(av[sa], bv[sb], ov[i]);
          }
        }
        if (tp.requires_grad(ib)) {
          Tensor& gb = tp.grad(ib);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t sa = source_index(bc.a, i, bc.cols);
            const std::size_t sb = source_index(bc.b, i, bc.cols);
            gb[sb] += g[i] * db(av[sa], bv[sb], ov[i]);
          }
        }
      },
      {x, y});
}

// f(x) -> value; df(x, out) -> derivative.
template <class F, class Df>
Var unary(const char* name, const Var& x, F f, Df df) {
  Tape& t = *x.tape();
  const Tensor& a = x.value();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  const std::size_t ia = x.id();
  return t.record(
      std::move(out), name,
      [ia, df](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(ia);
        const Tensor& ov = tp.value(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(av[i], ov[i]);
      },
      {x});
}

inline void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(a.shape()));
}

inline void require_square(const char* op, const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols())
    throw ShapeError(std::string(op) + ": expected a square matrix, got " + to_string(a.shape()));
}

}  // namespace detail

// ---- elementwise arithmetic ------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

inline Var div(const Var& a, const Var& b) {
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

inline Var scale(const Var& a, double c) {
  return detail::unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(const Var& a, double c) {
  return detail::unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

// ---- elementwise functions -------------------------------------------------

inline Var exp(const Var& a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(const Var& a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sqrt(const Var& a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(v));
  return detail::unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

inline Var tanh(const Var& a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sinh(const Var& a) {
  return detail::unary(
      "sinh", a, [](double x) { return std::sinh(x); }, [](double x, double) { return std::cosh(x); });
}

inline Var cosh(const Var& a) {
  return detail::unary(
      "cosh", a, [](double x) { return std::cosh(x); }, [](double x, double) { return std::sinh(x); });
}

inline Var asinh(const Var& a) {
  return detail::unary(
      "asinh", a, [](double x) { return std::asinh(x); },
      [](double x, double) { return 1.0 / std::sqrt(1.0 + x * x); });
}

inline Var square(const Var& a) {
  return detail::unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var abs(const Var& a) {
  // Subgradient 0 at the kink.
  return detail::unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var softplus(const Var& a) {
  return detail::unary(
      "softplus", a, [](double x) { return softplus(x); }, [](double x, double) { return sigmoid(x); });
}

inline Var shiesh(const Var& a, double b = 1.0) {
  return detail::unary(
      "shiesh", a, [b](double x) { return profiti::shiesh(x, b); },
      [b](double x, double) { return shiesh_derivative(x, b); });
}

/// log dShiesh/du, elementwise; the log-Jacobian contribution of a Shiesh layer.
inline Var shiesh_log_derivative(const Var& a, double b = 1.0) {
  return detail::unary(
      "shiesh_log_derivative", a, [b](double x) { return std::log(shiesh_derivative(x, b)); },
      [b](double x, double) { return shiesh_log_derivative_slope(x, b); });
}

/// Picks a where mask != 0, else b. The mask is a constant.
inline Var where(const Tensor& mask, const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (mask.shape() != a.shape() || a.shape() != b.shape()) {
    throw ShapeError("where: mask " + to_string(mask.shape()) + ", a " + to_string(a.shape()) + ", b " +
                     to_string(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? a.value()[i] : b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      std::move(out), "where",
      [ia, ib, mask](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(ia)) {
          Tensor& ga = tp.grad(ia);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (mask[i] != 0.0) ga[i] += g[i];
        }
        if (tp.requires_grad(ib)) {
          Tensor& gb = tp.grad(ib);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (mask[i] == 0.0) gb[i] += g[i];
        }
      },
      {a, b});
}

// ---- reductions --------------------------------------------------------------

inline Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const std::size_t ia = a.id();
  return a.tape()->record(
      Tensor::scalar(acc), "sum",
      [ia](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        for (double& v : tp.grad(ia).values()) v += g;
      },
      {a});
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Row sums of a matrix: [m, n] -> [m, 1].
inline Var sum_rows(const Var& a) {
  detail::require_matrix("sum_rows", a.value());
  const Tensor& v = a.value();
  Tensor out = Tensor::matrix(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) out(i, 0) += v(i, j);
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "sum_rows",
      [ia](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
      },
      {a});
}

// ---- linear algebra ----------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  Tensor out = profiti::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      std::move(out), "matmul",
      [ia, ib](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(ia);
        const Tensor& bv = tp.value(ib);
        const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
        if (tp.requires_grad(ia)) {
          // dA = G B^T
          Tensor& ga = tp.grad(ia);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * bv(p, j);
              ga(i, p) += acc;
            }
        }
        if (tp.requires_grad(ib)) {
          // dB = A^T G
          Tensor& gb = tp.grad(ib);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double av_ip = av(i, p);
              for (std::size_t j = 0; j < n; ++j) gb(p, j) += av_ip * g(i, j);
            }
        }
      },
      {a, b});
}

inline Var transpose(const Var& a) {
  detail::require_matrix("transpose", a.value());
  const std::size_t ia = a.id();
  return a.tape()->record(
      profiti::transpose(a.value()), "transpose",
      [ia](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
      },
      {a});
}

/// Row-wise softmax of a matrix.
inline Var softmax_rows(const Var& a) {
  detail::require_matrix("softmax_rows", a.value());
  const Tensor& v = a.value();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < v.cols(); ++j) mx = std::max(mx, v(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) {
      out(i, j) = std::exp(v(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < v.cols(); ++j) out(i, j) /= z;
  }
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "softmax_rows",
      [ia](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& s = tp.value(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < s.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < s.cols(); ++j) dot += g(i, j) * s(i, j);
          for (std::size_t j = 0; j < s.cols(); ++j) ga(i, j) += s(i, j) * (g(i, j) - dot);
        }
      },
      {a});
}

/// out[r] = a[index[r]]: row permutation or embedding lookup.
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  detail::require_matrix("gather_rows", a.value());
  const Tensor& v = a.value();
  Tensor out = Tensor::matrix(index.size(), v.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= v.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                       to_string(v.shape()));
    }
    for (std::size_t j = 0; j < v.cols(); ++j) out(r, j) = v(index[r], j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "gather_rows",
      [ia, index = std::move(index)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t r = 0; r < index.size(); ++r)
          for (std::size_t j = 0; j < g.cols(); ++j) ga(index[r], j) += g(r, j);
      },
      {a});
}

/// Keeps the lower triangle (strictly below the diagonal when `strict`).
inline Var tril(const Var& a, bool strict) {
  detail::require_matrix("tril", a.value());
  Tensor mask(a.value().shape());
  for (std::size_t i = 0; i < mask.rows(); ++i)
    for (std::size_t j = 0; j < mask.cols(); ++j) mask(i, j) = (strict ? j < i : j <= i) ? 1.0 : 0.0;
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] * a.value()[i];
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "tril",
      [ia, mask = std::move(mask)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += mask[i] * g[i];
      },
      {a});
}

/// Diagonal of a square matrix as an [n, 1] column.
inline Var diag(const Var& a) {
  detail::require_square("diag", a.value());
  const std::size_t n = a.rows();
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = a.value()(i, i);
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "diag",
      [ia](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < g.rows(); ++i) ga(i, i) += g(i, 0);
      },
      {a});
}

/// [n, 1] column -> n x n diagonal matrix.
inline Var diag_embed(const Var& v) {
  const Tensor& c = v.value();
  if (c.rank() != 2 || c.cols() != 1) throw ShapeError("diag_embed: expected [n, 1], got " + to_string(c.shape()));
  const std::size_t n = c.rows();
  Tensor out = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = c(i, 0);
  const std::size_t iv = v.id();
  return v.tape()->record(
      std::move(out), "diag_embed",
      [iv](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gv = tp.grad(iv);
        for (std::size_t i = 0; i < gv.rows(); ++i) gv(i, 0) += g(i, i);
      },
      {v});
}

/// Horizontal concatenation of matrices with equal row counts.
inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    detail::require_matrix("concat_cols", p.value());
    if (p.tape() != &t) throw Error("concat_cols: operands live on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + to_string(parts.front().shape()) + " vs " +
                       to_string(p.shape()));
    }
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offsets[k] + j) = v(i, j);
  }
  return t.record(
      std::move(out), "concat_cols",
      [ids, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!tp.requires_grad(ids[k])) continue;
          Tensor& gk = tp.grad(ids[k]);
          for (std::size_t i = 0; i < gk.rows(); ++i)
            for (std::size_t j = 0; j < gk.cols(); ++j) gk(i, j) += g(i, offsets[k] + j);
        }
      },
      parts);
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Columns [begin, end) of a matrix.
inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  detail::require_matrix("slice_cols", a.value());
  const Tensor& v = a.value();
  if (begin > end || end > v.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + to_string(v.shape()));
  }
  Tensor out = Tensor::matrix(v.rows(), end - begin);
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = v(i, j);
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), "slice_cols",
      [ia, begin](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
      },
      {a});
}

/// log|det A| via LU; gradient A^{-T}.
inline Var logabsdet(const Var& a) {
  detail::require_square("logabsdet", a.value());
  const linalg::LuDecomposition lu(a.value());
  if (lu.singular()) throw NumericError("logabsdet: matrix is singular");
  const std::size_t ia = a.id();
  return a.tape()->record(
      Tensor::scalar(lu.log_abs_det()), "logabsdet",
      [ia](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        const Tensor inv = linalg::LuDecomposition(tp.value(ia)).inverse();
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g * inv(j, i);
      },
      {a});
}

/// Spectral norm ||A||_2 by power iteration; gradient u v^T.
inline Var spectral_norm(const Var& a, double tolerance = 1e-9, std::size_t max_iterations = 10000) {
  detail::require_matrix("spectral_norm", a.value());
  linalg::SpectralNorm sn = linalg::spectral_norm(a.value(), tolerance, max_iterations);
  const std::size_t ia = a.id();
  const double value = sn.value;
  return a.tape()->record(
      Tensor::scalar(value), "spectral_norm",
      [ia, u = std::move(sn.left), v = std::move(sn.right)](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        Tensor& ga = tp.grad(ia);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g * u[i] * v[j];
      },
      {a});
}

}  // namespace profiti::ad
