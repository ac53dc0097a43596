// Copyright 2026 The kanspot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kanspot/gram.hpp"

#include <cmath>
#include <string>

#include "kanspot/error.hpp"

namespace kanspot {

namespace {

void check_degree(int degree) {
  if (degree < 0) throw ContractError("gram degree must be >= 0, got " + std::to_string(degree));
}

// Shared kernel for the scalar and batched entry points.
inline void eval_point(double x, int degree, double* values, double* derivs) {
  const double t = std::tanh(x);
  const double dt = 1.0 - t * t;
  values[0] = 1.0;
  double dp_prev = 0.0;  // dP_{n-1}/dt
  double dp_cur = 0.0;   // dP_n/dt
  derivs[0] = 0.0;
  if (degree >= 1) {
    values[1] = t;
    dp_cur = 1.0;
    derivs[1] = dt;
  }
  for (int n = 1; n < degree; ++n) {
    const double a = 2.0 * n + 1.0;
    const double inv = 1.0 / (n + 1.0);
    values[n + 1] = (a * t * values[n] - n * values[n - 1]) * inv;
    const double dp_next = (a * (values[n] + t * dp_cur) - n * dp_prev) * inv;
    derivs[n + 1] = dp_next * dt;
    dp_prev = dp_cur;
    dp_cur = dp_next;
  }
}

}  // namespace

BasisEval gram_eval(double x, int degree) {
  check_degree(degree);
  BasisEval out;
  out.values.resize(degree + 1);
  out.derivs.resize(degree + 1);
  eval_point(x, degree, out.values.data(), out.derivs.data());
  return out;
}

void gram_eval_batch(std::span<const double> xs, int degree, std::span<double> values,
                     std::span<double> derivs) {
  check_degree(degree);
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  if (values.size() != xs.size() * m || derivs.size() != xs.size() * m) {
    throw ContractError("gram_eval_batch: output buffers must hold " +
                        std::to_string(xs.size() * m) + " values");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    eval_point(xs[i], degree, values.data() + i * m, derivs.data() + i * m);
  }
}

double phi_reference(double x, double w_b, double w_s, std::span<const double> coeffs) {
  if (coeffs.empty()) throw ContractError("phi_reference needs at least one coefficient");
  const int degree = static_cast<int>(coeffs.size()) - 1;
  const BasisEval basis = gram_eval(x, degree);
  double s = 0.0;
  for (std::size_t m = 0; m < coeffs.size(); ++m) s += coeffs[m] * basis.values[m];
  const double silu = x / (1.0 + std::exp(-x));
  return w_b * silu + w_s * s;
}

double phi_reference(double x, double w_b, double w_s, std::span<const double> coeffs,
                     int degree) {
  check_degree(degree);
  if (coeffs.size() != static_cast<std::size_t>(degree) + 1) {
    throw ContractError("phi_reference: " + std::to_string(coeffs.size()) +
                        " coefficients for degree " + std::to_string(degree));
  }
  return phi_reference(x, w_b, w_s, coeffs);
}

}  // namespace kanspot
