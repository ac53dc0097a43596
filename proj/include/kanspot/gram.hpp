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

// Gram polynomial basis used by the learnable activations.
//
// Inputs are squashed with t = tanh(x) and expanded with the Legendre
// three-term recurrence
//
//   P0 = 1,  P1 = t,  (n+1) P(n+1) = (2n+1) t Pn - n P(n-1),
//
// so every basis value stays in [-1, 1]. Derivatives are taken with respect
// to x (chained through the squash).

#pragma once

#include <span>
#include <vector>

namespace kanspot {

struct BasisEval {
  std::vector<double> values;  // P_m(tanh(x)), m = 0..degree
  std::vector<double> derivs;  // dP_m(tanh(x)) / dx
};

BasisEval gram_eval(double x, int degree);

// Batched path. values/derivs are row-major [xs.size() x (degree+1)] and
// bitwise equal to calling gram_eval on each element.
void gram_eval_batch(std::span<const double> xs, int degree, std::span<double> values,
                     std::span<double> derivs);

// w_b * silu(x) + w_s * sum_m coeffs[m] * P_m(tanh(x)).
// Scalar reference activation; the layer code is checked against it.
// The overload taking `degree` rejects coeffs whose length is not degree+1.
double phi_reference(double x, double w_b, double w_s, std::span<const double> coeffs);
double phi_reference(double x, double w_b, double w_s, std::span<const double> coeffs,
                     int degree);

}  // namespace kanspot
