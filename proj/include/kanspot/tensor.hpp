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

// Dense float64 tensors with a dynamic reverse-mode tape.
//
// Every op that sees at least one requires_grad operand records a node whose
// parents are the operands. backward() traces the reachable nodes into a
// topologically ordered Tape, clears interior gradients, seeds the loss and
// runs the recorded closures in reverse. Leaf gradients accumulate across
// calls; call zero_grad() between optimisation steps.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kanspot {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}  // namespace detail

// Called during backward with the node's forward output and its gradient.
// Closures accumulate into their captured operands via grad_buffer().
using BackwardFn =
    std::function<void(std::span<const double> out, std::span<const double> out_grad)>;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writing through this on a tensor that already fed a recorded op
  // invalidates that graph; only do it on parameters between steps.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;  // empty when never written
  // Allocated as zeros on first use. Handles share storage, so this is const.
  std::span<double> grad_buffer() const;
  void zero_grad() const;

  // Fresh leaf holding a copy of the values.
  Tensor detach() const;

  const detail::Node* id() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor record_op(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);
  friend class Tape;

  std::shared_ptr<detail::Node> node_;
};

// Builds the result of an op. When grad mode is on and any parent requires a
// gradient, the node keeps its parents and closure; otherwise it is a plain
// constant.
Tensor record_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 BackwardFn backward);

bool grad_enabled();

// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Topologically ordered list of the recorded nodes reachable from a root.
// Parents always precede children.
class Tape {
 public:
  static Tape trace(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  // Position of a tensor's node, or size() when it is not on the tape.
  std::size_t index_of(const Tensor& t) const;
  // Tape positions of node i's parents.
  std::vector<std::size_t> parents_of(std::size_t i) const;

  // Runs the reverse sweep seeded with d(root)/d(root) = 1.
  void run_backward();

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

// Populates gradients of every requires_grad tensor reachable from loss.
// Throws ContractError unless loss holds exactly one element.
void backward(const Tensor& loss);

// ---- elementwise -----------------------------------------------------------
// Operands must have identical shapes, or one must hold a single element.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

// Softmax over the last axis.
Tensor softmax_lastdim(const Tensor& x);

// ---- reductions and shape --------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// ---- sequence ops on [B x C x T] -------------------------------------------

// Prepends `frames` zero frames along time.
Tensor pad_left(const Tensor& x, std::size_t frames);

// Valid cross-correlation: x [B x C_in x T+k-1], weight [C_out x C_in x k],
// optional bias [C_out] -> [B x C_out x T].
Tensor conv1d_valid(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

// y[b,c,t] = x[b,c,t] * scale[c] + offset[c]
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& offset);

}  // namespace kanspot
