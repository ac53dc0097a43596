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

#include "kanspot/encoder.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <random>
#include <utility>

#include "binio.hpp"
#include "kanspot/error.hpp"

namespace kanspot {

namespace {

constexpr std::array<std::pair<Variant, const char*>, 8> kVariantNames{{
    {Variant::kMlp, "MLP"},
    {Variant::kGkanMlp, "GKAN_MLP"},
    {Variant::kMlpGkan, "MLP_GKAN"},
    {Variant::kGkan, "GKAN"},
    {Variant::kGkanPre, "GKAN_pre"},
    {Variant::kGkanPost, "GKAN_post"},
    {Variant::kGkanMid, "GKAN_mid"},
    {Variant::kMlpPost, "MLP_post"},
}};

constexpr char kMagic[4] = {'K', 'S', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct Families {
  LayerFamily spatial, expand, project;
  ExtraPosition extra_position;
  LayerFamily extra;
};

Families families_for(Variant v) {
  using F = LayerFamily;
  using P = ExtraPosition;
  switch (v) {
    case Variant::kMlp: return {F::kMlp, F::kMlp, F::kMlp, P::kNone, F::kMlp};
    case Variant::kGkanMlp: return {F::kGkan, F::kMlp, F::kMlp, P::kNone, F::kMlp};
    case Variant::kMlpGkan: return {F::kMlp, F::kGkan, F::kGkan, P::kNone, F::kMlp};
    case Variant::kGkan: return {F::kGkan, F::kGkan, F::kGkan, P::kNone, F::kMlp};
    case Variant::kGkanPre: return {F::kMlp, F::kMlp, F::kMlp, P::kPre, F::kGkan};
    case Variant::kGkanPost: return {F::kMlp, F::kMlp, F::kMlp, P::kPost, F::kGkan};
    case Variant::kGkanMid: return {F::kMlp, F::kMlp, F::kMlp, P::kMid, F::kGkan};
    case Variant::kMlpPost: return {F::kMlp, F::kMlp, F::kMlp, P::kPost, F::kMlp};
  }
  throw ContractError("unknown variant");
}

const char* position_name(ExtraPosition p) {
  switch (p) {
    case ExtraPosition::kPre: return "pre";
    case ExtraPosition::kPost: return "post";
    case ExtraPosition::kMid: return "mid";
    case ExtraPosition::kNone: break;
  }
  return "none";
}

ConvLayer make_layer(LayerFamily family, std::size_t c_in, std::size_t c_out, std::size_t kernel,
                     const VariantConfig& cfg) {
  if (family == LayerFamily::kGkan) {
    return GkanConv1dLayer(c_in, c_out, kernel, cfg.degree, cfg.gkan_base);
  }
  return Conv1dLayer(c_in, c_out, kernel);
}

std::size_t layer_count(LayerFamily family, std::size_t c_in, std::size_t c_out,
                        std::size_t kernel, const VariantConfig& cfg) {
  return family == LayerFamily::kGkan
             ? gkan_param_count(c_in, c_out, kernel, cfg.degree, cfg.gkan_base)
             : conv1d_param_count(c_in, c_out, kernel);
}

std::string block_prefix(std::size_t i) { return "blocks." + std::to_string(i); }

}  // namespace

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = [] {
    std::vector<Variant> v;
    for (const auto& [variant, name] : kVariantNames) v.push_back(variant);
    return v;
  }();
  return kAll;
}

std::string variant_name(Variant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  throw ContractError("unknown variant");
}

Variant parse_variant(const std::string& name) {
  for (const auto& [variant, n] : kVariantNames) {
    if (name == n) return variant;
  }
  throw ContractError("invalid variant name '" + name + "'");
}

void VariantConfig::validate() const {
  if (K < 1 || e < 1 || w < 1 || degree < 1 || n_blocks < 1 || n_classes < 1 ||
      n_features < 1) {
    throw ContractError("variant config requires K, e, w, degree, n_blocks, n_classes and "
                        "n_features >= 1 (got K=" + std::to_string(K) + " e=" +
                        std::to_string(e) + " w=" + std::to_string(w) + " degree=" +
                        std::to_string(degree) + ")");
  }
  variant_name(variant);
}

// ---- LicoBlock ------------------------------------------------------------------

Tensor LicoBlock::forward(const Tensor& x) const {
  Tensor h = layer_forward(spatial, x);
  if (layer_family(spatial) == LayerFamily::kMlp) h = relu(h);
  if (affine) h = affine->forward(h);
  if (extra_position == ExtraPosition::kPre) h = layer_forward(*extra, h);
  Tensor u = layer_forward(expand, h);
  if (layer_family(expand) == LayerFamily::kMlp) u = relu(u);
  u = layer_forward(project, u);
  if (extra_position == ExtraPosition::kMid) u = add(u, layer_forward(*extra, h));
  if (extra_position == ExtraPosition::kPost) u = layer_forward(*extra, u);
  return residual_add(x, u);
}

// ---- Model ------------------------------------------------------------------------

Model::Model(const VariantConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      stem_(static_cast<std::size_t>(cfg.n_features), static_cast<std::size_t>(cfg.w), 1),
      head_(static_cast<std::size_t>(cfg.w), static_cast<std::size_t>(cfg.n_classes), 1) {
  const auto w = static_cast<std::size_t>(cfg.w);
  const auto ew = static_cast<std::size_t>(cfg.e) * w;
  const auto k = static_cast<std::size_t>(cfg.K);
  const Families fam = families_for(cfg.variant);

  std::mt19937_64 rng(seed);
  stem_.init(rng);
  blocks_.reserve(cfg.n_blocks);
  for (int i = 0; i < cfg.n_blocks; ++i) {
    LicoBlock block{make_layer(fam.spatial, w, w, k, cfg), make_layer(fam.expand, w, ew, 1, cfg),
                    make_layer(fam.project, ew, w, 1, cfg), std::nullopt, fam.extra_position,
                    std::nullopt};
    if (fam.extra_position != ExtraPosition::kNone) {
      block.extra = make_layer(fam.extra, w, w, 1, cfg);
    }
    if (cfg.channel_affine) block.affine.emplace(w);
    layer_init(block.spatial, rng);
    layer_init(block.expand, rng);
    layer_init(block.project, rng);
    if (block.extra) layer_init(*block.extra, rng);
    blocks_.push_back(std::move(block));
  }
  head_.init(rng);
}

Model Model::clone() const {
  Model copy(cfg_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].tensor.data();
    std::copy(from.begin(), from.end(), dst[i].tensor.mutable_data().begin());
  }
  return copy;
}

Tensor Model::forward(const Tensor& features) const {
  if (features.rank() != 3 || features.dim(1) != static_cast<std::size_t>(cfg_.n_features)) {
    throw DimensionError("model input must be [B x " + std::to_string(cfg_.n_features) +
                         " x T], got " + shape_str(features.shape()));
  }
  Tensor h = stem_.forward(features);
  for (const auto& block : blocks_) h = block.forward(h);
  return head_.forward(h);
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  stem_.collect("stem", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = block_prefix(i);
    layer_collect(b.spatial, p + ".spatial", out);
    if (b.affine) b.affine->collect(p + ".affine", out);
    layer_collect(b.expand, p + ".expand", out);
    layer_collect(b.project, p + ".project", out);
    if (b.extra) layer_collect(*b.extra, p + ".extra", out);
  }
  head_.collect("head", out);
  return out;
}

std::size_t Model::param_count() const {
  std::size_t n = stem_.param_count() + head_.param_count();
  for (const auto& b : blocks_) {
    n += layer_param_count(b.spatial) + layer_param_count(b.expand) +
         layer_param_count(b.project);
    if (b.extra) n += layer_param_count(*b.extra);
    if (b.affine) n += b.affine->param_count();
  }
  return n;
}

std::vector<LayerInfo> Model::layout() const {
  auto info = [](std::string name, std::string role, const ConvLayer& l) {
    return std::visit(
        [&](const auto& layer) {
          return LayerInfo{std::move(name), std::move(role), layer_family(l),
                           layer.in_channels(), layer.out_channels(), layer.kernel()};
        },
        l);
  };
  std::vector<LayerInfo> out;
  out.push_back(info("stem", "stem", ConvLayer(stem_)));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = block_prefix(i);
    out.push_back(info(p + ".spatial", "spatial", b.spatial));
    if (b.extra_position == ExtraPosition::kPre) {
      out.push_back(info(p + ".extra", "pre", *b.extra));
    }
    out.push_back(info(p + ".expand", "expand", b.expand));
    out.push_back(info(p + ".project", "project", b.project));
    if (b.extra_position == ExtraPosition::kMid || b.extra_position == ExtraPosition::kPost) {
      out.push_back(info(p + ".extra", position_name(b.extra_position), *b.extra));
    }
  }
  out.push_back(info("head", "head", ConvLayer(head_)));
  return out;
}

// ---- accounting -------------------------------------------------------------------

std::size_t model_param_count(const VariantConfig& cfg) {
  cfg.validate();
  const auto w = static_cast<std::size_t>(cfg.w);
  const auto ew = static_cast<std::size_t>(cfg.e) * w;
  const auto k = static_cast<std::size_t>(cfg.K);
  const Families fam = families_for(cfg.variant);
  std::size_t block = layer_count(fam.spatial, w, w, k, cfg) +
                      layer_count(fam.expand, w, ew, 1, cfg) +
                      layer_count(fam.project, ew, w, 1, cfg);
  if (fam.extra_position != ExtraPosition::kNone) block += layer_count(fam.extra, w, w, 1, cfg);
  if (cfg.channel_affine) block += 2 * w;
  return conv1d_param_count(cfg.n_features, w, 1) +
         static_cast<std::size_t>(cfg.n_blocks) * block +
         conv1d_param_count(w, cfg.n_classes, 1);
}

int width_for_budget(const VariantConfig& cfg, std::size_t budget) {
  VariantConfig probe = cfg;
  probe.w = 1;
  const std::size_t smallest = model_param_count(probe);
  if (smallest > budget) {
    throw InfeasibleError("budget " + std::to_string(budget) + " is below the " +
                          std::to_string(smallest) + " parameters of " +
                          variant_name(cfg.variant) + " at w=1");
  }
  // count(w) is strictly increasing, so grow an upper bound then bisect.
  int lo = 1, hi = 2;
  for (;;) {
    probe.w = hi;
    if (model_param_count(probe) > budget) break;
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    probe.w = mid;
    if (model_param_count(probe) <= budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---- checkpoints ------------------------------------------------------------------

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  const VariantConfig& c = model.config();
  os.write(kMagic, 4);
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  for (int v : {static_cast<int>(c.variant), c.K, c.e, c.w, c.degree, c.n_blocks, c.n_classes,
                c.n_features, static_cast<int>(c.gkan_base), static_cast<int>(c.channel_affine)}) {
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  const auto params = model.parameters();
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) binio::put<std::uint64_t>(os, d);
    for (double v : p.tensor.data()) binio::put<double>(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  try {
    char magic[4];
    if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
      throw DataError("not a kanspot checkpoint");
    }
    const auto version = binio::get<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    std::array<int, 10> f{};
    for (auto& v : f) v = static_cast<int>(binio::get<std::uint32_t>(is));
    if (f[0] < 0 || f[0] >= static_cast<int>(kVariantNames.size())) {
      throw DataError("bad variant id " + std::to_string(f[0]));
    }
    VariantConfig cfg;
    cfg.variant = static_cast<Variant>(f[0]);
    cfg.K = f[1];
    cfg.e = f[2];
    cfg.w = f[3];
    cfg.degree = f[4];
    cfg.n_blocks = f[5];
    cfg.n_classes = f[6];
    cfg.n_features = f[7];
    cfg.gkan_base = f[8] != 0;
    cfg.channel_affine = f[9] != 0;
    Model model(cfg, 0);
    auto params = model.parameters();
    const auto count = binio::get<std::uint32_t>(is);
    if (count != params.size()) {
      throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(params.size()));
    }
    for (auto& p : params) {
      const auto name_len = binio::get<std::uint32_t>(is);
      std::string name(name_len, '\0');
      if (!is.read(name.data(), name_len)) throw DataError("truncated tensor name");
      if (name != p.name) throw DataError("expected tensor '" + p.name + "', found '" + name + "'");
      const auto rank = binio::get<std::uint32_t>(is);
      Shape shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(binio::get<std::uint64_t>(is));
      if (shape != p.tensor.shape()) {
        throw DataError("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                        shape_str(p.tensor.shape()));
      }
      for (auto& v : p.tensor.mutable_data()) v = binio::get<double>(is);
    }
    return model;
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace kanspot
