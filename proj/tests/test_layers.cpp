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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "kanspot/error.hpp"
#include "kanspot/layers.hpp"
#include "test_util.hpp"

using namespace kanspot;
using kanspot::testing::conv_oracle;
using kanspot::testing::gkan_oracle;
using kanspot::testing::grad_check;
using kanspot::testing::normwise_rel_err;
using kanspot::testing::random_tensor;

namespace {

std::size_t requires_grad_elements(const std::vector<NamedParameter>& ps) {
  std::size_t n = 0;
  for (const auto& p : ps) {
    if (p.tensor.requires_grad()) n += p.tensor.numel();
  }
  return n;
}

// Shift right by s frames along time, zero-filling the front.
Tensor shift_right(const Tensor& x, std::size_t s) {
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  std::vector<double> v(B * C * (T + s), 0.0);
  for (std::size_t r = 0; r < B * C; ++r) {
    for (std::size_t t = 0; t < T; ++t) v[r * (T + s) + t + s] = x.data()[r * T + t];
  }
  return Tensor::from_data({B, C, T + s}, std::move(v));
}

}  // namespace

TEST_CASE("conv1d examples") {
  Conv1dLayer eye(3, 3, 1);
  auto w = eye.weight.mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  std::fill(eye.bias.mutable_data().begin(), eye.bias.mutable_data().end(), 0.0);
  std::mt19937_64 rng(1);
  auto x = random_tensor({2, 3, 6}, rng);
  auto y = eye.forward(x);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);

  // Causal padding: the last tap reads the current frame.
  Conv1dLayer delta(1, 1, 3);
  auto dw = delta.weight.mutable_data();
  dw[0] = 0.0, dw[1] = 0.0, dw[2] = 1.0;
  delta.bias.mutable_data()[0] = 0.0;
  auto x1 = random_tensor({1, 1, 8}, rng);
  auto y1 = delta.forward(x1);
  for (std::size_t i = 0; i < 8; ++i) CHECK(y1.data()[i] == x1.data()[i]);
  // Middle tap is a one-frame delay.
  dw[1] = 1.0, dw[2] = 0.0;
  y1 = delta.forward(x1);
  CHECK(y1.data()[0] == 0.0);
  for (std::size_t i = 1; i < 8; ++i) CHECK(y1.data()[i] == x1.data()[i - 1]);

  Conv1dLayer rnd(2, 2, 3);
  rnd.init(rng);
  auto x2 = random_tensor({1, 2, 5}, rng);
  auto expect = conv_oracle(x2, rnd);
  auto got = rnd.forward(x2);
  CHECK(normwise_rel_err(got.data(), expect) < 1e-15);

  CHECK_THROWS_AS(rnd.forward(random_tensor({1, 3, 5}, rng)), DimensionError);
}

TEST_CASE("gkan conv examples") {
  std::mt19937_64 rng(2);
  GkanConv1dLayer zero(3, 4, 5, 3);
  auto x = random_tensor({2, 3, 7}, rng);
  auto y = zero.forward(x);
  CHECK(y.shape() == Shape{2, 4, 7});
  for (double v : y.data()) CHECK(v == 0.0);

  GkanConv1dLayer p1(1, 1, 1, 3);
  auto c = p1.coeffs.mutable_data();
  c[0] = 0, c[1] = 1, c[2] = 0, c[3] = 0;
  auto x1 = random_tensor({1, 1, 9}, rng, -3, 3);
  auto y1 = p1.forward(x1);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(y1.data()[i] == doctest::Approx(std::tanh(x1.data()[i])).epsilon(1e-15));
  }

  GkanConv1dLayer rnd(2, 3, 5, 3);
  rnd.init(rng);
  auto x2 = random_tensor({1, 2, 7}, rng);
  CHECK(normwise_rel_err(rnd.forward(x2).data(), gkan_oracle(x2, rnd)) < 1e-12);

  CHECK_THROWS_AS(rnd.forward(random_tensor({1, 3, 7}, rng)), DimensionError);
}

TEST_CASE("gkan forward equals the scalar oracle on every small shape") {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  int shapes = 0;
  for (std::size_t B : {1, 2}) {
    for (std::size_t C : {1, 2, 3, 4}) {
      for (std::size_t k : {1, 2, 3, 5}) {
        for (std::size_t T : {1, 4, 8}) {
          for (bool base : {false, true}) {
            GkanConv1dLayer layer(C, C + 1, k, 3, base);
            layer.init(rng);
            auto x = random_tensor({B, C, T}, rng, -3, 3);
            worst = std::max(worst, normwise_rel_err(layer.forward(x).data(), gkan_oracle(x, layer)));
            ++shapes;
          }
        }
      }
    }
  }
  CHECK(shapes == 192);
  CHECK(worst < 1e-12);
}

TEST_CASE("param counts") {
  CHECK(conv1d_param_count(72, 72, 5) == 25992);
  CHECK(gkan_param_count(62, 62, 1, 3) == 15376);
  CHECK(gkan_param_count(62, 62, 1, 3) == 4 * conv1d_param_count(62, 62, 1, false));
  CHECK(gkan_param_count(10, 7, 3, 3, true) == 10 * 7 * 3 * 5);

  Conv1dLayer conv(72, 72, 5);
  CHECK(conv.param_count() == 25992);
  GkanConv1dLayer gk(62, 62, 1, 3);
  CHECK(gk.param_count() == 15376);

  // Counted parameters equal the elements actually flagged for training.
  std::vector<NamedParameter> ps;
  for (const ConvLayer& l : {ConvLayer(Conv1dLayer(5, 6, 3)), ConvLayer(Conv1dLayer(5, 6, 3, false)),
                             ConvLayer(GkanConv1dLayer(5, 6, 3, 3)),
                             ConvLayer(GkanConv1dLayer(5, 6, 2, 4, true))}) {
    ps.clear();
    layer_collect(l, "l", ps);
    CHECK(layer_param_count(l) == requires_grad_elements(ps));
  }
  ChannelAffine aff(7);
  ps.clear();
  aff.collect("a", ps);
  CHECK(aff.param_count() == requires_grad_elements(ps));
  CHECK(aff.param_count() == 14);
}

TEST_CASE("residual_add") {
  std::mt19937_64 rng(4);
  auto x = random_tensor({2, 3, 4}, rng, -2, 2, true);
  auto fx = random_tensor({2, 3, 4}, rng, -2, 2, true);
  auto z = Tensor::zeros({2, 3, 4});
  auto a = residual_add(x, z);
  auto b = residual_add(z, fx);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(a.data()[i] == x.data()[i]);
    CHECK(b.data()[i] == fx.data()[i]);
  }
  backward(sum(residual_add(x, fx)));
  for (double g : x.grad()) CHECK(g == 1.0);
  for (double g : fx.grad()) CHECK(g == 1.0);

  auto probe = random_tensor({2, 3, 4}, rng);
  auto gc = grad_check([&] { return sum(mul(residual_add(x, mul(fx, fx)), probe)); },
                       {{"x", x}, {"fx", fx}});
  CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);

  CHECK_THROWS_AS(residual_add(x, Tensor::zeros({2, 3, 5})), DimensionError);
}

TEST_CASE("layer parameter gradients match finite differences") {
  std::mt19937_64 rng(5);
  auto x = random_tensor({2, 3, 6}, rng, -2, 2, true);
  std::vector<ConvLayer> layers{ConvLayer(Conv1dLayer(3, 4, 3)),
                                ConvLayer(GkanConv1dLayer(3, 4, 3, 3)),
                                ConvLayer(GkanConv1dLayer(3, 4, 2, 3, true)),
                                ConvLayer(GkanConv1dLayer(3, 2, 1, 5))};
  for (auto& l : layers) {
    layer_init(l, rng);
    std::vector<NamedParameter> ps;
    layer_collect(l, "layer", ps);
    ps.push_back({"x", x});
    auto probe = random_tensor(layer_forward(l, x).shape(), rng);
    auto gc = grad_check([&] { return sum(mul(layer_forward(l, x), probe)); }, ps);
    CAPTURE(family_name(layer_family(l)));
    CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);
  }

  ChannelAffine aff(3);
  std::vector<NamedParameter> ps;
  aff.collect("aff", ps);
  ps.push_back({"x", x});
  auto probe = random_tensor({2, 3, 6}, rng);
  auto gc = grad_check([&] { return sum(mul(aff.forward(x), probe)); }, ps);
  CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);
}

TEST_CASE("time-shift equivariance") {
  std::mt19937_64 rng(6);
  std::vector<ConvLayer> layers{ConvLayer(Conv1dLayer(2, 3, 4, false)),
                                ConvLayer(GkanConv1dLayer(2, 3, 4, 3))};
  for (auto& l : layers) {
    layer_init(l, rng);
    auto x = random_tensor({1, 2, 6}, rng);
    auto y = layer_forward(l, x);
    for (std::size_t s : {1, 3}) {
      auto ys = layer_forward(l, shift_right(x, s));
      CAPTURE(s);
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < 6; ++t) {
          CHECK(ys.data()[c * (6 + s) + t + s] ==
                doctest::Approx(y.data()[c * 6 + t]).epsilon(1e-13));
        }
      }
    }
  }
  // A biased conv is equivariant once the prefix is trimmed too.
  Conv1dLayer biased(2, 2, 3);
  biased.init(rng);
  auto x = random_tensor({1, 2, 5}, rng);
  auto y = biased.forward(x);
  auto ys = biased.forward(shift_right(x, 2));
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(ys.data()[c * 7 + t + 2] == doctest::Approx(y.data()[c * 5 + t]).epsilon(1e-13));
    }
  }
}

TEST_CASE("initialisation scales") {
  std::mt19937_64 rng(7);
  Conv1dLayer conv(16, 16, 5);
  conv.init(rng);
  const double bound = 1.0 / std::sqrt(80.0);
  for (double v : conv.weight.data()) CHECK(std::abs(v) <= bound);
  GkanConv1dLayer gk(64, 64, 1, 3);
  gk.init(rng);
  double ss = 0.0;
  for (double v : gk.coeffs.data()) ss += v * v;
  const double sd = std::sqrt(ss / gk.coeffs.numel());
  CHECK(sd == doctest::Approx(1.0 / (4.0 * 8.0)).epsilon(0.05));
}
