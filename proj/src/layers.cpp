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

#include "kanspot/layers.hpp"

#include <cmath>

#include "kanspot/error.hpp"
#include "kanspot/gram.hpp"

namespace kanspot {

namespace {

void check_input(const Tensor& x, std::size_t c_in, const char* what) {
  if (x.rank() != 3 || x.dim(1) != c_in) {
    throw DimensionError(std::string(what) + ": expected [B x " + std::to_string(c_in) +
                         " x T], got " + shape_str(x.shape()));
  }
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.mutable_data()) v = dist(rng);
}

}  // namespace

const char* family_name(LayerFamily f) { return f == LayerFamily::kMlp ? "MLP" : "GKAN"; }

std::size_t conv1d_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel,
                               bool bias) {
  return c_out * c_in * kernel + (bias ? c_out : 0);
}

std::size_t gkan_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel, int degree,
                             bool base_term) {
  const std::size_t taps = c_out * c_in * kernel;
  return taps * static_cast<std::size_t>(degree + 1) + (base_term ? taps : 0);
}

// ---- Conv1dLayer ---------------------------------------------------------------

Conv1dLayer::Conv1dLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel, bool has_bias)
    : c_in_(c_in), c_out_(c_out), kernel_(kernel) {
  if (c_in == 0 || c_out == 0 || kernel == 0) {
    throw ContractError("Conv1dLayer needs positive channels and kernel");
  }
  weight = Tensor::zeros({c_out, c_in, kernel}, true);
  if (has_bias) bias = Tensor::zeros({c_out}, true);
}

void Conv1dLayer::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in_ * kernel_));
  fill_uniform(weight, bound, rng);
  if (bias.defined()) fill_uniform(bias, bound, rng);
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  check_input(x, c_in_, "conv1d");
  return conv1d_valid(pad_left(x, kernel_ - 1), weight, bias);
}

std::size_t Conv1dLayer::param_count() const {
  return conv1d_param_count(c_in_, c_out_, kernel_, bias.defined());
}

void Conv1dLayer::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

// ---- GkanConv1dLayer ------------------------------------------------------------

GkanConv1dLayer::GkanConv1dLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel,
                                 int degree, bool base_term)
    : c_in_(c_in), c_out_(c_out), kernel_(kernel), degree_(degree) {
  if (c_in == 0 || c_out == 0 || kernel == 0) {
    throw ContractError("GkanConv1dLayer needs positive channels and kernel");
  }
  if (degree < 0) throw ContractError("GkanConv1dLayer degree must be >= 0");
  coeffs = Tensor::zeros({c_out, c_in, kernel, static_cast<std::size_t>(degree) + 1}, true);
  if (base_term) base_weight = Tensor::zeros({c_out, c_in, kernel}, true);
}

void GkanConv1dLayer::init(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(c_in_ * kernel_);
  std::normal_distribution<double> dist(0.0, 1.0 / ((degree_ + 1) * std::sqrt(fan_in)));
  for (auto& v : coeffs.mutable_data()) v = dist(rng);
  if (base_weight.defined()) fill_uniform(base_weight, 1.0 / std::sqrt(fan_in), rng);
}

Tensor GkanConv1dLayer::forward(const Tensor& x) const {
  check_input(x, c_in_, "gkan_conv1d");
  const Tensor padded = pad_left(x, kernel_ - 1);
  Tensor y = gram_conv1d_valid(gram_expand(padded, degree_), coeffs);
  if (base_weight.defined()) y = add(y, conv1d_valid(silu(padded), base_weight));
  return y;
}

std::size_t GkanConv1dLayer::param_count() const {
  return gkan_param_count(c_in_, c_out_, kernel_, degree_, base_weight.defined());
}

void GkanConv1dLayer::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".coeffs", coeffs});
  if (base_weight.defined()) out.push_back({prefix + ".base_weight", base_weight});
}

// ---- ChannelAffine ------------------------------------------------------------------

ChannelAffine::ChannelAffine(std::size_t channels)
    : scale(Tensor::full({channels}, 1.0, true)), offset(Tensor::zeros({channels}, true)) {}

Tensor ChannelAffine::forward(const Tensor& x) const { return channel_affine(x, scale, offset); }

void ChannelAffine::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".scale", scale});
  out.push_back({prefix + ".offset", offset});
}

// ---- variant helpers ---------------------------------------------------------------

Tensor layer_forward(const ConvLayer& layer, const Tensor& x) {
  return std::visit([&](const auto& l) { return l.forward(x); }, layer);
}

std::size_t layer_param_count(const ConvLayer& layer) {
  return std::visit([](const auto& l) { return l.param_count(); }, layer);
}

LayerFamily layer_family(const ConvLayer& layer) {
  return std::holds_alternative<Conv1dLayer>(layer) ? LayerFamily::kMlp : LayerFamily::kGkan;
}

void layer_init(ConvLayer& layer, std::mt19937_64& rng) {
  std::visit([&](auto& l) { l.init(rng); }, layer);
}

void layer_collect(const ConvLayer& layer, const std::string& prefix,
                   std::vector<NamedParameter>& out) {
  std::visit([&](const auto& l) { l.collect(prefix, out); }, layer);
}

Tensor residual_add(const Tensor& x, const Tensor& fx) {
  if (x.shape() != fx.shape()) {
    throw DimensionError("residual_add: " + shape_str(x.shape()) + " vs " +
                         shape_str(fx.shape()));
  }
  return add(x, fx);
}

// ---- GKAN ops ---------------------------------------------------------------------

Tensor gram_expand(const Tensor& x, int degree) {
  if (x.rank() != 3) throw DimensionError("gram_expand: expected [B x C x T]");
  if (degree < 0) throw ContractError("gram_expand: negative degree");
  const std::size_t rows = x.dim(0) * x.dim(1), t_len = x.dim(2);
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  auto xv = x.data();
  // Point-major scratch from the batched evaluator, then transposed so each
  // basis order is a contiguous time row.
  std::vector<double> pv(xv.size() * m), pd(xv.size() * m);
  gram_eval_batch(xv, degree, pv, pd);
  std::vector<double> out(xv.size() * m), derivs(xv.size() * m);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < t_len; ++t) {
      const std::size_t src = (r * t_len + t) * m;
      for (std::size_t j = 0; j < m; ++j) {
        out[(r * m + j) * t_len + t] = pv[src + j];
        derivs[(r * m + j) * t_len + t] = pd[src + j];
      }
    }
  }
  return record_op({x.dim(0), x.dim(1), m, t_len}, std::move(out), {x},
                   [x, rows, m, t_len, derivs = std::move(derivs)](
                       std::span<const double>, std::span<const double> g) mutable {
                     auto gx = x.grad_buffer();
                     for (std::size_t r = 0; r < rows; ++r) {
                       double* gxr = gx.data() + r * t_len;
                       for (std::size_t j = 0; j < m; ++j) {
                         const double* gr = g.data() + (r * m + j) * t_len;
                         const double* dr = derivs.data() + (r * m + j) * t_len;
                         for (std::size_t t = 0; t < t_len; ++t) gxr[t] += gr[t] * dr[t];
                       }
                     }
                   });
}

Tensor gram_conv1d_valid(const Tensor& basis, const Tensor& coeffs) {
  if (basis.rank() != 4 || coeffs.rank() != 4 || basis.dim(1) != coeffs.dim(1) ||
      basis.dim(2) != coeffs.dim(3)) {
    throw DimensionError("gram_conv1d: basis " + shape_str(basis.shape()) +
                         " does not match coeffs " + shape_str(coeffs.shape()));
  }
  const std::size_t batch = basis.dim(0), c_in = basis.dim(1), m = basis.dim(2);
  const std::size_t t_in = basis.dim(3), c_out = coeffs.dim(0), k = coeffs.dim(2);
  if (t_in < k) throw DimensionError("gram_conv1d: sequence shorter than kernel");
  const std::size_t t_out = t_in - k + 1;
  auto bv = basis.data(), cv = coeffs.data();
  std::vector<double> out(batch * c_out * t_out, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* y = out.data() + (b * c_out + o) * t_out;
      for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t a = 0; a < k; ++a) {
          const double* cr = cv.data() + ((o * c_in + c) * k + a) * m;
          for (std::size_t j = 0; j < m; ++j) {
            const double w = cr[j];
            const double* xs = bv.data() + ((b * c_in + c) * m + j) * t_in + a;
            for (std::size_t t = 0; t < t_out; ++t) y[t] += w * xs[t];
          }
        }
      }
    }
  }
  return record_op(
      {batch, c_out, t_out}, std::move(out), {basis, coeffs},
      [basis, coeffs, batch, c_in, m, t_in, c_out, k, t_out](std::span<const double>,
                                                             std::span<const double> g) mutable {
        auto bv = basis.data(), cv = coeffs.data();
        if (basis.requires_grad()) {
          auto gb = basis.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * t_out;
              for (std::size_t c = 0; c < c_in; ++c) {
                for (std::size_t a = 0; a < k; ++a) {
                  const double* cr = cv.data() + ((o * c_in + c) * k + a) * m;
                  for (std::size_t j = 0; j < m; ++j) {
                    const double w = cr[j];
                    double* gs = gb.data() + ((b * c_in + c) * m + j) * t_in + a;
                    for (std::size_t t = 0; t < t_out; ++t) gs[t] += w * gy[t];
                  }
                }
              }
            }
          }
        }
        if (coeffs.requires_grad()) {
          auto gc = coeffs.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * t_out;
              for (std::size_t c = 0; c < c_in; ++c) {
                for (std::size_t a = 0; a < k; ++a) {
                  double* gcr = gc.data() + ((o * c_in + c) * k + a) * m;
                  for (std::size_t j = 0; j < m; ++j) {
                    const double* xs = bv.data() + ((b * c_in + c) * m + j) * t_in + a;
                    double s = 0.0;
                    for (std::size_t t = 0; t < t_out; ++t) s += gy[t] * xs[t];
                    gcr[j] += s;
                  }
                }
              }
            }
          }
        }
      });
}

}  // namespace kanspot
