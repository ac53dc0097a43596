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

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "kanspot/tensor.hpp"

namespace kanspot {

enum class LayerFamily { kMlp, kGkan };

const char* family_name(LayerFamily f);

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

std::size_t conv1d_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel,
                               bool bias = true);
std::size_t gkan_param_count(std::size_t c_in, std::size_t c_out, std::size_t kernel,
                             int degree, bool base_term = false);

// Standard Conv1D with causal left padding of kernel-1 frames, stride 1.
class Conv1dLayer {
 public:
  Conv1dLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel, bool bias = true);

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
  void init(std::mt19937_64& rng);

  // [B x C_in x T] -> [B x C_out x T]
  Tensor forward(const Tensor& x) const;

  std::size_t param_count() const;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;

  std::size_t in_channels() const { return c_in_; }
  std::size_t out_channels() const { return c_out_; }
  std::size_t kernel() const { return kernel_; }

  Tensor weight;  // [C_out x C_in x k]
  Tensor bias;    // [C_out], undefined when disabled

 private:
  std::size_t c_in_, c_out_, kernel_;
};

// GKAN Conv1D:
//
//   y[o, i] = sum_d sum_a phi_{o,a,d}(x[d, i + a - (k-1)])
//   phi(x)  = sum_m coeffs[o,d,a,m] P_m(tanh(x))  (+ base[o,d,a] silu(x))
//
// Input frames before the start of the sequence read as zero.
class GkanConv1dLayer {
 public:
  GkanConv1dLayer(std::size_t c_in, std::size_t c_out, std::size_t kernel, int degree,
                  bool base_term = false);

  // coeffs ~ N(0, (1 / ((degree+1) sqrt(fan_in)))^2); base weight like a conv.
  void init(std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;

  std::size_t param_count() const;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;

  std::size_t in_channels() const { return c_in_; }
  std::size_t out_channels() const { return c_out_; }
  std::size_t kernel() const { return kernel_; }
  int degree() const { return degree_; }
  bool has_base_term() const { return base_weight.defined(); }

  Tensor coeffs;       // [C_out x C_in x k x (degree+1)]
  Tensor base_weight;  // [C_out x C_in x k], undefined unless enabled

 private:
  std::size_t c_in_, c_out_, kernel_;
  int degree_;
};

// Per-channel scale and offset; optional inside blocks, off by default.
class ChannelAffine {
 public:
  explicit ChannelAffine(std::size_t channels);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return 2 * scale.numel(); }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;

  Tensor scale;
  Tensor offset;
};

using ConvLayer = std::variant<Conv1dLayer, GkanConv1dLayer>;

Tensor layer_forward(const ConvLayer& layer, const Tensor& x);
std::size_t layer_param_count(const ConvLayer& layer);
LayerFamily layer_family(const ConvLayer& layer);
void layer_init(ConvLayer& layer, std::mt19937_64& rng);
void layer_collect(const ConvLayer& layer, const std::string& prefix,
                   std::vector<NamedParameter>& out);

// x + fx with an exact shape check.
Tensor residual_add(const Tensor& x, const Tensor& fx);

// [B x C x T] -> [B x C x (degree+1) x T] holding P_m(tanh(x)).
Tensor gram_expand(const Tensor& x, int degree);

// basis [B x C_in x M x T+k-1], coeffs [C_out x C_in x k x M] -> [B x C_out x T]
Tensor gram_conv1d_valid(const Tensor& basis, const Tensor& coeffs);

}  // namespace kanspot
