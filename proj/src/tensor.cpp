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

#include "kanspot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "kanspot/error.hpp"

namespace kanspot {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void check_finite_output([[maybe_unused]] const std::vector<double>& data,
                         [[maybe_unused]] const std::vector<Tensor>& parents) {
#ifdef KANSPOT_CHECK_FINITE
  for (const auto& p : parents) {
    for (double v : p.data()) {
      if (!std::isfinite(v)) return;
    }
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw ContractError("non-finite output from finite inputs");
  }
#endif
}

Shape binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " are not compatible");
}

// Index helper for the scalar-broadcast case.
inline std::size_t bidx(std::size_t i, std::size_t n) { return n == 1 ? 0 : i; }

Tensor unary(const Tensor& x, double (*f)(double), double (*df)(double x, double y)) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return record_op(x.shape(), std::move(out), {x},
                   [x, df](std::span<const double> y, std::span<const double> g) mutable {
                     auto gx = x.grad_buffer();
                     auto xv = x.data();
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], y[i]);
                   });
}

void require_rank3(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected [B x C x T], got " + shape_str(x.shape()));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::is_leaf() const { return !node_->backward; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::grad_buffer() const {
  if (node_->grad.size() != node_->data.size()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() const {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

// ---- recording --------------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor record_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 BackwardFn backward) {
  check_finite_output(data, parents);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tape Tape::trace(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_map<const detail::Node*, bool> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node_, 0);
  seen[root.node_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (parent->requires_grad && !seen[parent.get()]) {
        seen[parent.get()] = true;
        stack.emplace_back(std::move(parent), 0);
      }
      continue;
    }
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

std::size_t Tape::index_of(const Tensor& t) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].get() == t.id()) return i;
  }
  return nodes_.size();
}

std::vector<std::size_t> Tape::parents_of(std::size_t i) const {
  std::vector<std::size_t> out;
  for (const auto& p : nodes_.at(i)->parents) {
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      if (nodes_[j] == p) out.push_back(j);
    }
  }
  return out;
}

void Tape::run_backward() {
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  // Interior gradients are per-sweep scratch; leaves accumulate.
  for (auto& n : nodes_) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  }
  auto& root = nodes_.back();
  if (root->grad.size() != root->data.size()) root->grad.assign(root->data.size(), 0.0);
  root->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& n = *it;
    if (n->backward) n->backward(n->data, n->grad);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  Tape::trace(loss).run_backward();
}

// ---- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Shape shape = binary_shape(a, b, "add");
  const std::size_t n = shape_numel(shape), na = a.numel(), nb = b.numel();
  auto av = a.data(), bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[bidx(i, na)] + bv[bidx(i, nb)];
  return record_op(std::move(shape), std::move(out), {a, b},
                   [a, b, na, nb](std::span<const double>, std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[bidx(i, na)] += g[i];
                     }
                     if (b.requires_grad()) {
                       auto gb = b.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) gb[bidx(i, nb)] += g[i];
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Shape shape = binary_shape(a, b, "sub");
  const std::size_t n = shape_numel(shape), na = a.numel(), nb = b.numel();
  auto av = a.data(), bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[bidx(i, na)] - bv[bidx(i, nb)];
  return record_op(std::move(shape), std::move(out), {a, b},
                   [a, b, na, nb](std::span<const double>, std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[bidx(i, na)] += g[i];
                     }
                     if (b.requires_grad()) {
                       auto gb = b.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) gb[bidx(i, nb)] -= g[i];
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Shape shape = binary_shape(a, b, "mul");
  const std::size_t n = shape_numel(shape), na = a.numel(), nb = b.numel();
  auto av = a.data(), bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[bidx(i, na)] * bv[bidx(i, nb)];
  return record_op(std::move(shape), std::move(out), {a, b},
                   [a, b, na, nb](std::span<const double>, std::span<const double> g) mutable {
                     auto av = a.data(), bv = b.data();
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         ga[bidx(i, na)] += g[i] * bv[bidx(i, nb)];
                       }
                     }
                     if (b.requires_grad()) {
                       auto gb = b.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gb[bidx(i, nb)] += g[i] * av[bidx(i, na)];
                       }
                     }
                   });
}

Tensor scale(const Tensor& a, double factor) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return record_op(a.shape(), std::move(out), {a},
                   [a, factor](std::span<const double>, std::span<const double> g) mutable {
                     auto ga = a.grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                   });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax_lastdim on a rank-0 tensor");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n ? x.numel() / n : 0;
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return record_op(x.shape(), std::move(out), {x},
                   [x, n, rows](std::span<const double> y, std::span<const double> g) mutable {
                     auto gx = x.grad_buffer();
                     for (std::size_t r = 0; r < rows; ++r) {
                       double dot = 0.0;
                       for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
                       for (std::size_t j = 0; j < n; ++j) {
                         gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
                       }
                     }
                   });
}

// ---- reductions and shape ---------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return record_op({}, {s}, {x}, [x](std::span<const double>, std::span<const double> g) mutable {
    auto gx = x.grad_buffer();
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return record_op(std::move(shape), std::move(out), {x},
                   [x](std::span<const double>, std::span<const double> g) mutable {
                     auto gx = x.grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto av = a.data(), bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return record_op({m, n}, std::move(out), {a, b},
                   [a, b, m, k, n](std::span<const double>, std::span<const double> g) mutable {
                     auto av = a.data(), bv = b.data();
                     if (a.requires_grad()) {
                       // dA = G * B^T
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t p = 0; p < k; ++p) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
                           ga[i * k + p] += s;
                         }
                       }
                     }
                     if (b.requires_grad()) {
                       // dB = A^T * G
                       auto gb = b.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t p = 0; p < k; ++p) {
                           const double aip = av[i * k + p];
                           for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                         }
                       }
                     }
                   });
}

// ---- sequence ops -------------------------------------------------------------

Tensor pad_left(const Tensor& x, std::size_t frames) {
  require_rank3(x, "pad_left");
  if (frames == 0) return x;
  const std::size_t rows = x.dim(0) * x.dim(1), t_in = x.dim(2), t_out = t_in + frames;
  auto xv = x.data();
  std::vector<double> out(rows * t_out, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * t_in, t_in, out.data() + r * t_out + frames);
  }
  return record_op({x.dim(0), x.dim(1), t_out}, std::move(out), {x},
                   [x, rows, t_in, t_out, frames](std::span<const double>,
                                                  std::span<const double> g) mutable {
                     auto gx = x.grad_buffer();
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (std::size_t t = 0; t < t_in; ++t) {
                         gx[r * t_in + t] += g[r * t_out + frames + t];
                       }
                     }
                   });
}

Tensor conv1d_valid(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank3(x, "conv1d");
  if (weight.rank() != 3 || weight.dim(1) != x.dim(1)) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const std::size_t batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  if (t_in < k) {
    throw DimensionError("conv1d: " + std::to_string(t_in) + " frames shorter than kernel " +
                         std::to_string(k));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != c_out)) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(c_out) + " output channels");
  }
  const std::size_t t_out = t_in - k + 1;
  auto xv = x.data(), wv = weight.data();
  std::vector<double> out(batch * c_out * t_out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* y = out.data() + (b * c_out + o) * t_out;
      std::fill_n(y, t_out, has_bias ? bias.data()[o] : 0.0);
      for (std::size_t c = 0; c < c_in; ++c) {
        const double* xr = xv.data() + (b * c_in + c) * t_in;
        const double* wr = wv.data() + (o * c_in + c) * k;
        for (std::size_t a = 0; a < k; ++a) {
          const double w = wr[a];
          const double* xs = xr + a;
          for (std::size_t t = 0; t < t_out; ++t) y[t] += w * xs[t];
        }
      }
    }
  }
  std::vector<Tensor> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return record_op(
      {batch, c_out, t_out}, std::move(out), std::move(parents),
      [x, weight, bias, batch, c_in, t_in, c_out, k, t_out](std::span<const double>,
                                                            std::span<const double> g) mutable {
        auto xv = x.data(), wv = weight.data();
        if (x.requires_grad()) {
          auto gx = x.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * t_out;
              for (std::size_t c = 0; c < c_in; ++c) {
                double* gxr = gx.data() + (b * c_in + c) * t_in;
                const double* wr = wv.data() + (o * c_in + c) * k;
                for (std::size_t a = 0; a < k; ++a) {
                  const double w = wr[a];
                  double* gxs = gxr + a;
                  for (std::size_t t = 0; t < t_out; ++t) gxs[t] += w * gy[t];
                }
              }
            }
          }
        }
        if (weight.requires_grad()) {
          auto gw = weight.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * t_out;
              for (std::size_t c = 0; c < c_in; ++c) {
                const double* xr = xv.data() + (b * c_in + c) * t_in;
                double* gwr = gw.data() + (o * c_in + c) * k;
                for (std::size_t a = 0; a < k; ++a) {
                  double s = 0.0;
                  for (std::size_t t = 0; t < t_out; ++t) s += gy[t] * xr[a + t];
                  gwr[a] += s;
                }
              }
            }
          }
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * t_out;
              double s = 0.0;
              for (std::size_t t = 0; t < t_out; ++t) s += gy[t];
              gb[o] += s;
            }
          }
        }
      });
}

Tensor channel_affine(const Tensor& x, const Tensor& scale_t, const Tensor& offset) {
  require_rank3(x, "channel_affine");
  const std::size_t batch = x.dim(0), ch = x.dim(1), t = x.dim(2);
  if (scale_t.numel() != ch || offset.numel() != ch) {
    throw DimensionError("channel_affine: " + std::to_string(ch) + " channels vs scale " +
                         shape_str(scale_t.shape()) + " offset " + shape_str(offset.shape()));
  }
  auto xv = x.data(), sv = scale_t.data(), ov = offset.data();
  std::vector<double> out(xv.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (b * ch + c) * t;
      for (std::size_t i = 0; i < t; ++i) out[base + i] = xv[base + i] * sv[c] + ov[c];
    }
  }
  return record_op(x.shape(), std::move(out), {x, scale_t, offset},
                   [x, scale_t, offset, batch, ch, t](std::span<const double>,
                                                      std::span<const double> g) mutable {
                     auto xv = x.data(), sv = scale_t.data();
                     for (std::size_t b = 0; b < batch; ++b) {
                       for (std::size_t c = 0; c < ch; ++c) {
                         const std::size_t base = (b * ch + c) * t;
                         double gs = 0.0, go = 0.0;
                         for (std::size_t i = 0; i < t; ++i) {
                           gs += g[base + i] * xv[base + i];
                           go += g[base + i];
                         }
                         if (x.requires_grad()) {
                           auto gx = x.grad_buffer();
                           for (std::size_t i = 0; i < t; ++i) gx[base + i] += g[base + i] * sv[c];
                         }
                         if (scale_t.requires_grad()) scale_t.grad_buffer()[c] += gs;
                         if (offset.requires_grad()) offset.grad_buffer()[c] += go;
                       }
                     }
                   });
}

}  // namespace kanspot
