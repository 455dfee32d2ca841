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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

namespace profiti {
namespace {

using std::numbers::e;
using testing::random_tensor;

// Integrates dv/dtau = tanh(b v) over tau in [0, 1] with classical RK4.
// Separating variables gives sinh(b v(1)) = e^b sinh(b v(0)), the activation.
double shiesh_ode(double u, double b, int steps = 2000) {
  const double h = 1.0 / steps;
  auto f = [b](double v) { return std::tanh(b * v); };
  double v = u;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(v), k2 = f(v + 0.5 * h * k1), k3 = f(v + 0.5 * h * k2), k4 = f(v + h * k3);
    v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return v;
}

TEST(Shiesh, PinnedValues) {
  EXPECT_EQ(shiesh(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(shiesh(10.0, 1.0), 11.0);
  EXPECT_DOUBLE_EQ(shiesh(-10.0, 1.0), -11.0);
  EXPECT_EQ(shiesh_inverse(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(shiesh_inverse(11.0, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(shiesh_derivative(0.0, 1.0), e);
  EXPECT_EQ(shiesh_derivative(10.0, 1.0), 1.0);
}

TEST(Shiesh, MatchesOdeOracle) {
  EXPECT_NEAR(shiesh(2.0, 1.0), shiesh_ode(2.0, 1.0), 1e-6);
  for (double b : {0.5, 1.0, 2.0}) {
    for (double u = -5.0; u <= 5.0; u += 0.25) {
      if (std::abs(b * u) > 5.0) continue;  // the closed form only runs inside the threshold
      EXPECT_NEAR(shiesh(u, b), shiesh_ode(u, b), 1e-6) << "u=" << u << " b=" << b;
    }
  }
}

TEST(Shiesh, RoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double u = U(rng);
    EXPECT_NEAR(shiesh_inverse(shiesh(u, 1.0), 1.0), u, 1e-8) << u;
    EXPECT_NEAR(shiesh(shiesh_inverse(u, 1.0), 1.0), u, 1e-8) << u;
  }
}

TEST(Shiesh, DerivativeMatchesFiniteDifferences) {
  const double h = 1e-5;
  for (int i = 0; i < 200; ++i) {
    const double u = -4.95 + 9.9 * i / 199.0;
    const double fd = (shiesh(u + h) - shiesh(u - h)) / (2 * h);
    EXPECT_NEAR(shiesh_derivative(u), fd, 1e-6 * fd) << u;
  }
  for (double u : {-12.0, 7.5, 30.0}) EXPECT_NEAR((shiesh(u + h) - shiesh(u - h)) / (2 * h), 1.0, 1e-9);
}

TEST(Shiesh, LogDerivativeSlopeMatchesFiniteDifferences) {
  const double h = 1e-5;
  for (double b : {0.5, 1.0}) {
    for (double u = -4.9; u <= 4.9; u += 0.35) {
      const double fd = (std::log(shiesh_derivative(u + h, b)) - std::log(shiesh_derivative(u - h, b))) / (2 * h);
      EXPECT_NEAR(shiesh_log_derivative_slope(u, b), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Shiesh, DerivativeBounds) {
  for (int i = 0; i <= 1000; ++i) {
    const double u = -5.0 + 10.0 * i / 1000.0;
    const double d = shiesh_derivative(u, 1.0);
    EXPECT_GT(d, 1.0);
    EXPECT_LE(d, e);
  }
  for (double u : {5.01, -6.0, 100.0}) EXPECT_EQ(shiesh_derivative(u, 1.0), 1.0);
}

TEST(Shiesh, MonotoneAndOdd) {
  double prev = shiesh(-25.0);
  for (int i = 1; i <= 10000; ++i) {
    const double u = -25.0 + 50.0 * i / 10000.0;
    const double v = shiesh(u);
    EXPECT_LT(prev, v) << u;
    prev = v;
    EXPECT_NEAR(shiesh(-u), -v, 1e-12);
  }
}

TEST(Shiesh, BranchSwitchGap) {
  // With the threshold at |u| = 5 the outer branch u + sign(u) differs from the
  // closed form by asinh(e sinh 5) - 6, about 3.9e-5. The round trip stays
  // exact because the inverse mirrors the branches.
  const double inner = std::asinh(e * std::sinh(5.0));
  const double gap = 6.0 - inner;
  EXPECT_NEAR(gap, 3.9256e-5, 1e-9);
  EXPECT_DOUBLE_EQ(shiesh(5.0), inner);
  EXPECT_NEAR(shiesh(std::nextafter(5.0, 6.0)), 6.0, 1e-12);
  EXPECT_NEAR(shiesh_inverse(shiesh(5.0)), 5.0, 1e-12);
}

TEST(ElementwiseLinear, IdentityAndRoundTrip) {
  std::mt19937_64 rng(22);
  ElementwiseLinear el;
  el.scale_net = {Tensor::matrix(3, 4), Tensor::matrix(1, 4), Tensor::matrix(4, 1), Tensor::matrix(1, 1)};
  el.shift_net = el.scale_net;
  const std::vector<double> x{0.3, -1.0, 2.0};
  EXPECT_EQ(el.forward(1.7, x), 1.7);
  EXPECT_EQ(el.log_scale(x), 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    el.scale_net = {random_tensor({3, 4}, rng, -2, 2), random_tensor({1, 4}, rng), random_tensor({4, 1}, rng, -3, 3),
                    random_tensor({1, 1}, rng)};
    el.shift_net = {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng), random_tensor({4, 1}, rng),
                    random_tensor({1, 1}, rng)};
    const double y = std::uniform_real_distribution<double>(-10, 10)(rng);
    EXPECT_NEAR(el.inverse(el.forward(y, x), x), y, 1e-10);
  }
}

TEST(ElementwiseLinear, ScaleStaysInBounds) {
  std::mt19937_64 rng(23);
  ElementwiseLinear el;
  el.scale_net = {random_tensor({2, 8}, rng, -5, 5), random_tensor({1, 8}, rng, -5, 5),
                  random_tensor({8, 1}, rng, -50, 50), random_tensor({1, 1}, rng)};
  std::uniform_real_distribution<double> U(-100, 100);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{U(rng), U(rng)};
    const double s = el.scale(x);
    EXPECT_GE(s, 1.0 / e);
    EXPECT_LE(s, e);
  }
}

TEST(Attention, ScoresByHand) {
  const Tensor x = Tensor::matrix({{1}, {2}});
  const Tensor w = Tensor::matrix({{1}});
  EXPECT_EQ(attention_scores(x, w, w), Tensor::matrix({{1, 2}, {2, 4}}));
  EXPECT_EQ(attention_scores(x, Tensor::matrix(1, 3), Tensor::matrix(1, 3)), Tensor::matrix(2, 2));
  EXPECT_EQ(attention_scores(Tensor::matrix({{0.5, 1.0}}), Tensor::matrix({{1}, {1}}), Tensor::matrix({{2}, {0}})).shape(),
            (Shape{1, 1}));
}

TEST(Attention, RegularizedClosedForms) {
  EXPECT_EQ(regularized_attention(Tensor::matrix(3, 3), 1e-5), Tensor::identity(3));
  const Tensor m = regularized_attention(Tensor::matrix({{0, 1}, {1, 0}}), 1e-5);
  const double c = 1.0 / (1.0 + 1e-5);
  EXPECT_NEAR(m(0, 1), c, 1e-12);
  EXPECT_NEAR(m(0, 0), 1.0, 1e-15);
  const double det = linalg::LuDecomposition(m).determinant();
  EXPECT_NEAR(det, 1.0 - c * c, 1e-12);
  EXPECT_GT(det, 1e-9);
}

TEST(Attention, RegularizedAlwaysInvertible) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + trial % 8;
    Tensor a = Tensor::matrix(k, k);
    for (double& v : a.values()) v = N(rng);
    const Tensor m = regularized_attention(a, 1e-5);
    const double det = k <= 6 ? testing::leibniz_det(m) : linalg::LuDecomposition(m).determinant();
    EXPECT_GT(std::abs(det), 1e-12) << "trial " << trial;
  }
}

TEST(Attention, TriangularStructureAndLogDet) {
  const Tensor zero = triangular_attention(Tensor::matrix(4, 4), 1e-5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(zero(i, j), i == j ? std::log(2.0) + 1e-5 : 0.0);
  EXPECT_NEAR(triangular_log_det(zero), 4 * std::log(std::log(2.0) + 1e-5), 1e-14);

  std::mt19937_64 rng(25);
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor a = random_tensor({k, k}, rng, -3, 3);
      const Tensor m = triangular_attention(a, 1e-5);
      for (std::size_t i = 0; i < k; ++i) {
        EXPECT_GT(m(i, i), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
          if (j > i) {
            EXPECT_EQ(m(i, j), 0.0);
          }
          if (j < i) {
            EXPECT_EQ(m(i, j), a(i, j));
          }
        }
      }
      const double oracle = std::log(std::abs(testing::leibniz_det(m)));
      EXPECT_NEAR(triangular_log_det(m), oracle, 1e-10 * std::max(1.0, std::abs(oracle)));
    }
  }
  const Tensor one = triangular_attention(Tensor::matrix({{0.3}}), 1e-5);
  EXPECT_DOUBLE_EQ(one(0, 0), ad::softplus(0.3) + 1e-5);
}

TEST(Attention, ITransRowsAndInvertibility) {
  EXPECT_EQ(itrans_attention(Tensor::matrix({{0.7}})), Tensor::matrix({{2.0}}));
  const Tensor flat = itrans_attention(Tensor::matrix(3, 3, 1.5));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(flat(i, j), 1.0 / 3 + (i == j), 1e-15);
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + trial % 8;
    const Tensor m = itrans_attention(random_tensor({k, k}, rng, -4, 4));
    EXPECT_GT(std::abs(linalg::LuDecomposition(m).determinant()), 1e-12);
  }
}

TEST(Attention, DifferentiableMatricesMatchPlain) {
  std::mt19937_64 rng(27);
  const Tensor scores = random_tensor({5, 5}, rng, -2, 2);
  for (AttentionKind kind : {AttentionKind::Triangular, AttentionKind::Regularized, AttentionKind::ITrans}) {
    ad::Tape t;
    const auto [m, ld] = ad::attention_matrix(kind, t.constant(scores), 1e-5);
    const Tensor plain = attention_matrix(kind, scores, 1e-5);
    for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(m.value()[i], plain[i], 1e-13);
    EXPECT_NEAR(ld.value().item(), attention_log_det(kind, plain), 1e-12);

    const auto [md, ldd] = ad::attention_matrix(kind, t.constant(scores), 1e-5, true);
    double expect = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      expect += std::log(plain(i, i));
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(md.value()(i, j), i == j ? md.value()(i, i) : 0.0);
      EXPECT_NEAR(md.value()(i, i), plain(i, i), 1e-13);
    }
    EXPECT_NEAR(ldd.value().item(), expect, 1e-12);
  }
}

TEST(Attention, DifferentiableLogDetGradients) {
  std::mt19937_64 rng(28);
  const Tensor scores = random_tensor({4, 4}, rng, -2, 2);
  for (AttentionKind kind : {AttentionKind::Triangular, AttentionKind::Regularized, AttentionKind::ITrans}) {
    using V = std::vector<ad::Var>;
    const double tol = kind == AttentionKind::Regularized ? 1e-4 : 1e-6;
    EXPECT_LT(testing::gradient_error([kind](V& v) { return ad::attention_matrix(kind, v[0], 1e-5).second; }, {scores}), tol);
    EXPECT_LT(testing::gradient_error([kind](V& v) { return ad::attention_matrix(kind, v[0], 1e-5).first; }, {scores}), tol);
  }
}

struct SitaFixture {
  std::vector<Query> queries{{1, 2}, {0, 2}, {2, 1}, {3, 1}, {0, 1}, {3, 3}};
  Tensor x;
  AttentionParams params;
  std::vector<double> z;
  explicit SitaFixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    x = random_tensor({6, 4}, rng);
    params.query_proj = random_tensor({4, 3}, rng);
    params.key_proj = random_tensor({4, 3}, rng);
    for (int i = 0; i < 6; ++i) z.push_back(std::uniform_real_distribution<double>(-3, 3)(rng));
  }
};

TEST(Sita, ForwardInverseIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SitaFixture f(seed);
    const LayerOutput y = sita_forward(f.z, f.x, f.queries, {}, f.params);
    const LayerOutput back = sita_inverse(y.values, f.x, f.queries, {}, f.params);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(back.values[i], f.z[i], 1e-8);
    EXPECT_NEAR(y.log_det + back.log_det, 0.0, 1e-12);
    const LayerOutput again = sita_forward(sita_inverse(f.z, f.x, f.queries, {}, f.params).values, f.x, f.queries, {}, f.params);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(again.values[i], f.z[i], 1e-8);
  }
}

TEST(Sita, ZeroWeightsScaleByLog2) {
  SitaFixture f(3);
  f.params.query_proj.fill(0.0);
  f.params.key_proj.fill(0.0);
  const LayerOutput y = sita_forward(f.z, f.x, f.queries, {}, f.params);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(y.values[i], (std::log(2.0) + 1e-5) * f.z[i], 1e-14);
}

TEST(Sita, EquivariantUnderJointPermutation) {
  std::mt19937_64 rng(29);
  SitaFixture f(4);
  const LayerOutput ref = sita_forward(f.z, f.x, f.queries, {}, f.params);
  for (int trial = 0; trial < 10; ++trial) {
    Permutation p = identity_permutation(6);
    std::shuffle(p.begin(), p.end(), rng);
    const LayerOutput y = sita_forward(apply_permutation(f.z, p), apply_permutation(f.x, p),
                                       apply_permutation(f.queries, p), {}, f.params);
    const auto unpermuted = apply_permutation(y.values, invert_permutation(p));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(unpermuted[i], ref.values[i], 1e-12);
    EXPECT_NEAR(y.log_det, ref.log_det, 1e-12);
  }
}

TEST(Sita, InverseCostIsQuadratic) {
  // Log-log slope of the multiply-add count of the triangular solve.
  std::vector<double> lk, lops;
  for (std::size_t k : {64u, 128u, 256u, 512u}) {
    Tensor l = Tensor::identity(k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.01;
    std::size_t ops = 0;
    linalg::forward_substitution(l, std::vector<double>(k, 1.0), &ops);
    lk.push_back(std::log(static_cast<double>(k)));
    lops.push_back(std::log(static_cast<double>(ops)));
  }
  const double slope = (lops.back() - lops.front()) / (lk.back() - lk.front());
  EXPECT_LT(slope, 2.4);
  EXPECT_GT(slope, 1.9);
}

TEST(Mlp, PlainAndDifferentiableAgree) {
  std::mt19937_64 rng(30);
  const Mlp net{random_tensor({3, 5}, rng), random_tensor({1, 5}, rng), random_tensor({5, 1}, rng), random_tensor({1, 1}, rng)};
  const Tensor x = random_tensor({4, 3}, rng);
  ad::Tape t;
  const auto out = ad::mlp(t.constant(x), t.constant(net.w1), t.constant(net.b1), t.constant(net.w2), t.constant(net.b2));
  const auto plain = net.rows(x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.value()(i, 0), plain[i], 1e-14);
}

}  // namespace
}  // namespace profiti
