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

namespace profiti {

// Shiesh(u; b) = asinh(e^b sinh(b u)) / b, the time-1 flow of dv/dtau = tanh(b v).
// Evaluated piecewise: the closed form for |u| <= 5 and its asymptote
// u + sign(u) beyond, which avoids overflow in sinh. The inverse switches at
// |v| > 6, the image of the forward threshold for b = 1.

inline constexpr double kShieshForwardThreshold = 5.0;
inline constexpr double kShieshInverseThreshold = 6.0;

inline double shiesh(double u, double b = 1.0) {
  if (std::abs(u) <= kShieshForwardThreshold) return std::asinh(std::exp(b) * std::sinh(b * u)) / b;
  return u + std::copysign(1.0, u);
}

inline double shiesh_inverse(double v, double b = 1.0) {
  if (std::abs(v) <= kShieshInverseThreshold) return std::asinh(std::exp(-b) * std::sinh(b * v)) / b;
  return v - std::copysign(1.0, v);
}

/// dShiesh/du, bounded in (1, e^b]; exactly 1 on the outer branch.
inline double shiesh_derivative(double u, double b = 1.0) {
  if (std::abs(u) > kShieshForwardThreshold) return 1.0;
  const double w = std::exp(b) * std::sinh(b * u);
  return std::exp(b) * std::cosh(b * u) / std::sqrt(1.0 + w * w);
}

/// d/du log(dShiesh/du). Zero on the outer branch.
inline double shiesh_log_derivative_slope(double u, double b = 1.0) {
  if (std::abs(u) > kShieshForwardThreshold) return 0.0;
  // D'(u) / D(u) with D' = b e^b sinh(bu) (1 - e^{2b}) / (1 + e^{2b} sinh^2(bu))^{3/2}
  const double eb = std::exp(b);
  const double s = std::sinh(b * u);
  const double c = std::cosh(b * u);
  const double q = 1.0 + eb * eb * s * s;
  return b * s * (1.0 - eb * eb) / (c * q);
}

}  // namespace profiti
