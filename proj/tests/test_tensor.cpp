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
#include <cstring>
#include <set>

#include "kanspot/error.hpp"
#include "kanspot/tensor.hpp"
#include "test_util.hpp"

using namespace kanspot;
using kanspot::testing::grad_check;
using kanspot::testing::random_tensor;

namespace {

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("elementwise examples") {
  auto a = Tensor::from_data({2}, {1, 2});
  auto b = Tensor::from_data({2}, {3, 4});
  CHECK(vec(add(a, b)) == std::vector<double>{4, 6});
  CHECK(vec(sub(b, a)) == std::vector<double>{2, 2});
  CHECK(vec(scale(a, 3.0)) == std::vector<double>{3, 6});

  std::mt19937_64 rng(1);
  auto x = random_tensor({3, 4}, rng, -2, 2, true);
  auto y = mul(x, Tensor::scalar(0.0));
  for (double v : y.data()) CHECK(v == 0.0);
  backward(sum(y));
  for (double g : x.grad()) CHECK(g == 0.0);

  auto z = add(x, Tensor::zeros({3, 4}));
  CHECK(std::memcmp(z.data().data(), x.data().data(), sizeof(double) * x.numel()) == 0);
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2 x 3]") != std::string::npos);
    CHECK(msg.find("[3 x 2]") != std::string::npos);
  }
  CHECK_THROWS_AS(mul(a, b), DimensionError);
  CHECK_THROWS_AS(sub(a, b), DimensionError);
  // Scalar operands broadcast.
  CHECK(add(a, Tensor::scalar(1.0)).shape() == Shape{2, 3});
}

TEST_CASE("matmul") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(vec(matmul(eye, m)) == std::vector<double>{1, 2, 3, 4});
  CHECK(matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4})).item() ==
        11.0);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);

  // d sum(A B) / dA = ones * B^T, checked against finite differences.
  std::mt19937_64 rng(7);
  auto A = random_tensor({3, 4}, rng, -2, 2, true);
  auto B = random_tensor({4, 5}, rng, -2, 2, true);
  backward(sum(matmul(A, B)));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t p = 0; p < 4; ++p) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 5; ++j) expect += B.data()[p * 5 + j];
      CHECK(A.grad()[i * 4 + p] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  A.zero_grad();
  B.zero_grad();
  auto gc = grad_check([&] { return sum(matmul(A, B)); }, {{"A", A}, {"B", B}}, 1e-6);
  CHECK_MESSAGE(gc.max_rel_err < 1e-6, gc.worst);
}

TEST_CASE("backward examples") {
  auto x = Tensor::from_data({3}, {5, -1, 2}, true);
  backward(sum(x));
  CHECK(vec(Tensor::from_data({3}, {x.grad().begin(), x.grad().end()})) ==
        std::vector<double>{1, 1, 1});

  auto y = Tensor::from_data({2}, {1, 2}, true);
  backward(sum(mul(y, y)));
  CHECK(y.grad()[0] == 2.0);
  CHECK(y.grad()[1] == 4.0);

  CHECK_THROWS_AS(backward(mul(y, y)), ContractError);
  // No recorded op -> empty tape.
  CHECK_THROWS_AS(backward(sum(Tensor::zeros({2}))), ContractError);
}

TEST_CASE("unreachable tensors keep their gradients") {
  auto a = Tensor::from_data({2}, {1, 2}, true);
  auto b = Tensor::from_data({2}, {3, 4}, true);
  b.grad_buffer()[0] = 42.0;
  backward(sum(a));
  CHECK(b.grad()[0] == 42.0);
  CHECK(b.grad()[1] == 0.0);
}

TEST_CASE("backward twice doubles leaf gradients") {
  std::mt19937_64 rng(3);
  auto x = random_tensor({4}, rng, -2, 2, true);
  auto loss = sum(mul(tanh(x), x));
  backward(loss);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-14));
  }
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("activation examples") {
  CHECK(silu(Tensor::scalar(0.0)).item() == 0.0);
  auto x = Tensor::scalar(0.0, true);
  auto t = tanh(x);
  CHECK(t.item() == 0.0);
  backward(t);
  CHECK(x.grad()[0] == 1.0);

  auto s = softmax_lastdim(Tensor::zeros({3}));
  for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  std::mt19937_64 rng(11);
  auto z = softmax_lastdim(random_tensor({7, 13}, rng, -20, 20));
  for (std::size_t r = 0; r < 7; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 13; ++j) total += z.data()[r * 13 + j];
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("tape is topologically ordered and visits each node once") {
  auto x = Tensor::from_data({2}, {0.5, -0.25}, true);
  auto a = tanh(x);
  auto b = mul(a, x);     // diamond: a and x both feed b
  auto c = add(b, a);
  auto loss = sum(c);
  Tape tape = Tape::trace(loss);
  CHECK(tape.size() == 5);
  std::set<std::size_t> positions;
  for (const Tensor* t : {&x, &a, &b, &c, &loss}) {
    const std::size_t i = tape.index_of(*t);
    REQUIRE(i < tape.size());
    positions.insert(i);
    for (std::size_t p : tape.parents_of(i)) CHECK(p < i);
  }
  CHECK(positions.size() == 5);
  CHECK(tape.index_of(loss) == tape.size() - 1);
}

TEST_CASE("no-grad guard records nothing") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = tanh(x);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
  CHECK(tanh(x).requires_grad());
}

TEST_CASE("every differentiable op matches finite differences on random inputs") {
  std::mt19937_64 rng(2026);
  using Op = std::function<Tensor(const Tensor&)>;
  struct Case {
    const char* name;
    Op op;
    double lo, hi;
  };
  const std::vector<Case> unary{
      {"silu", [](const Tensor& x) { return silu(x); }, -2, 2},
      {"tanh", [](const Tensor& x) { return tanh(x); }, -2, 2},
      {"relu", [](const Tensor& x) { return relu(x); }, -2, 2},
      {"exp", [](const Tensor& x) { return exp(x); }, -2, 2},
      {"log", [](const Tensor& x) { return log(x); }, 0.1, 2},
      {"softmax", [](const Tensor& x) { return softmax_lastdim(x); }, -2, 2},
      {"scale", [](const Tensor& x) { return scale(x, -1.7); }, -2, 2},
      {"reshape", [](const Tensor& x) { return reshape(x, {25, 4}); }, -2, 2},
  };
  for (const auto& c : unary) {
    CAPTURE(c.name);
    // 100 random inputs in one [4 x 25] tensor; the probe weights make every
    // output element matter.
    auto x = random_tensor({4, 25}, rng, c.lo, c.hi, true);
    auto w = random_tensor({c.name == std::string("reshape") ? 25u : 4u,
                            c.name == std::string("reshape") ? 4u : 25u},
                           rng);
    auto gc = grad_check([&] { return sum(mul(c.op(x), w)); }, {{"x", x}});
    CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);
    for (double v : c.op(x).data()) CHECK(std::isfinite(v));
  }

  auto a = random_tensor({100}, rng, -2, 2, true);
  auto b = random_tensor({100}, rng, -2, 2, true);
  auto s = Tensor::from_data({}, {0.7}, true);
  for (auto [name, op] : std::vector<std::pair<const char*, std::function<Tensor()>>>{
           {"add", [&] { return sum(mul(add(a, b), b)); }},
           {"sub", [&] { return sum(mul(sub(a, b), b)); }},
           {"mul", [&] { return sum(mul(mul(a, b), b)); }},
           {"mul_scalar", [&] { return sum(mul(mul(a, s), b)); }},
           {"mean", [&] { return mean(mul(a, b)); }},
       }) {
    CAPTURE(name);
    auto gc = grad_check(op, {{"a", a}, {"b", b}, {"s", s}});
    CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);
  }
}

TEST_CASE("sequence ops match finite differences") {
  std::mt19937_64 rng(5);
  auto x = random_tensor({2, 3, 6}, rng, -2, 2, true);
  auto w = random_tensor({4, 3, 3}, rng, -1, 1, true);
  auto bias = random_tensor({4}, rng, -1, 1, true);
  auto probe = random_tensor({2, 4, 6}, rng);
  auto gc = grad_check([&] { return sum(mul(conv1d_valid(pad_left(x, 2), w, bias), probe)); },
                       {{"x", x}, {"w", w}, {"bias", bias}});
  CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);

  auto sc = random_tensor({3}, rng, -1, 1, true);
  auto off = random_tensor({3}, rng, -1, 1, true);
  auto probe2 = random_tensor({2, 3, 6}, rng);
  gc = grad_check([&] { return sum(mul(channel_affine(x, sc, off), probe2)); },
                  {{"x", x}, {"scale", sc}, {"offset", off}});
  CHECK_MESSAGE(gc.max_rel_err < 1e-4, gc.worst);

  CHECK(pad_left(x, 3).shape() == Shape{2, 3, 9});
  CHECK(pad_left(x, 3).data()[0] == 0.0);
  CHECK(pad_left(x, 3).data()[3] == x.data()[0]);
  CHECK_THROWS_AS(conv1d_valid(x, Tensor::zeros({4, 2, 3})), DimensionError);
}
