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

// LiCo-Net encoder: a kernel-1 input stem, n_blocks LiCo-Blocks and a
// kernel-1 output head producing per-frame class logits.
//
// Every block is  x -> spatial(K) -> expand(1, w -> e*w) -> project(1, e*w -> w)
// with a residual from the block input to the block output. The variant
// decides which of those convolutions are GKAN and whether an extra w -> w
// kernel-1 layer is inserted:
//
//   MLP        all standard
//   GKAN_MLP   GKAN spatial
//   MLP_GKAN   GKAN expand and project
//   GKAN       all GKAN
//   GKAN_pre   extra GKAN between spatial and expand
//   GKAN_post  extra GKAN after project, before the residual add
//   GKAN_mid   extra GKAN fed by the spatial output, summed with project
//   MLP_post   like GKAN_post with a standard conv as the extra layer
//
// ReLU follows standard spatial and expand convolutions only.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kanspot/layers.hpp"
#include "kanspot/tensor.hpp"

namespace kanspot {

enum class Variant { kMlp, kGkanMlp, kMlpGkan, kGkan, kGkanPre, kGkanPost, kGkanMid, kMlpPost };

const std::vector<Variant>& all_variants();
std::string variant_name(Variant v);
// Accepts the canonical names (MLP, GKAN_MLP, ..., MLP_post); throws
// ContractError naming the token otherwise.
Variant parse_variant(const std::string& name);

struct VariantConfig {
  Variant variant = Variant::kMlp;
  int K = 5;   // spatial kernel
  int e = 6;   // expansion ratio
  int w = 72;  // channel width
  int degree = 3;
  int n_blocks = 5;
  int n_classes = 13;
  int n_features = 40;
  bool gkan_base = false;       // add the w_b * silu(x) term to GKAN layers
  bool channel_affine = false;  // per-channel scale/offset after the spatial conv

  void validate() const;
  bool operator==(const VariantConfig&) const = default;
};

enum class ExtraPosition { kNone, kPre, kPost, kMid };

struct LicoBlock {
  ConvLayer spatial;
  ConvLayer expand;
  ConvLayer project;
  std::optional<ConvLayer> extra;
  ExtraPosition extra_position = ExtraPosition::kNone;
  std::optional<ChannelAffine> affine;

  Tensor forward(const Tensor& x) const;
};

// One entry per convolution in forward order.
struct LayerInfo {
  std::string name;  // e.g. "blocks.2.extra"
  std::string role;  // stem | spatial | expand | project | pre | post | mid | head
  LayerFamily family;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
};

class Model {
 public:
  // Builds the network and initialises every parameter from `seed`.
  Model(const VariantConfig& cfg, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Deep copy with independent parameter storage.
  Model clone() const;

  // features [B x n_features x T] -> logits [B x n_classes x T]
  Tensor forward(const Tensor& features) const;

  std::vector<NamedParameter> parameters() const;
  std::size_t param_count() const;
  std::vector<LayerInfo> layout() const;

  const VariantConfig& config() const { return cfg_; }
  const Conv1dLayer& stem() const { return stem_; }
  const Conv1dLayer& head() const { return head_; }
  const std::vector<LicoBlock>& blocks() const { return blocks_; }

 private:
  VariantConfig cfg_;
  Conv1dLayer stem_;
  std::vector<LicoBlock> blocks_;
  Conv1dLayer head_;
};

// Pure function of the config; equals Model(cfg, s).param_count().
std::size_t model_param_count(const VariantConfig& cfg);

// Largest w with model_param_count(cfg with w) <= budget. cfg.w is ignored.
// Throws InfeasibleError when even w = 1 exceeds the budget.
int width_for_budget(const VariantConfig& cfg, std::size_t budget);

// Checkpoint file: "KSPT", u32 version, the config as u32 fields, u32 tensor
// count, then per tensor: u32 name length, name bytes, u32 rank, u64 dims,
// float64 values. All integers and floats little-endian.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace kanspot
