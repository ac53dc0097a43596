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

#include "kanspot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "kanspot/error.hpp"
#include "kanspot/keywords.hpp"
#include "kanspot/parallel.hpp"

namespace kanspot {

namespace fs = std::filesystem;

std::vector<double> default_class_weights() {
  std::vector<double> w(kNumClasses, 8.0);
  w[kSil] = 1.0;
  w[kFiller] = 2.0;
  return w;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(eps > 0.0) || batch_size < 1 || epochs < 0) {
    throw ContractError("invalid training config (lr, betas in [0, 1), eps > 0, batch_size >= 1, "
                        "epochs >= 0)");
  }
  if (class_weights.size() != static_cast<std::size_t>(kNumClasses)) {
    throw ContractError("expected 13 class weights, got " + std::to_string(class_weights.size()));
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ContractError("class weights must be positive");
  }
}

// ---- loss ------------------------------------------------------------------------

Tensor weighted_ce(const Tensor& logits, const std::vector<int>& labels,
                   const std::vector<double>& weights) {
  if (logits.rank() != 3) {
    throw DimensionError("weighted_ce expects [B x C x T] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t B = logits.dim(0), C = logits.dim(1), T = logits.dim(2);
  if (labels.size() != B * T) {
    throw DimensionError("weighted_ce got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(B * T) + " frames");
  }
  if (weights.size() != C) {
    throw DimensionError("weighted_ce got " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(C) + " classes");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw ContractError("label " + std::to_string(y) + " outside [0, " + std::to_string(C - 1) +
                          "]");
    }
  }
  const auto z = logits.data();
  // Softmax per frame, kept for backward.
  auto probs = std::make_shared<std::vector<double>>(B * C * T);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double mx = -INFINITY;
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, z[(b * C + c) * T + t]);
      double se = 0.0;
      for (std::size_t c = 0; c < C; ++c) se += std::exp(z[(b * C + c) * T + t] - mx);
      const double lse = mx + std::log(se);
      for (std::size_t c = 0; c < C; ++c) {
        (*probs)[(b * C + c) * T + t] = std::exp(z[(b * C + c) * T + t] - lse);
      }
      const int y = labels[b * T + t];
      total += weights[y] * (lse - z[(b * C + y) * T + t]);
    }
  }
  const double n = double(B * T);
  return record_op({}, {n > 0 ? total / n : 0.0}, {logits},
                   [logits, labels, weights, probs, B, C, T, n](std::span<const double>,
                                                                std::span<const double> g) {
                     auto gz = logits.grad_buffer();
                     for (std::size_t b = 0; b < B; ++b) {
                       for (std::size_t t = 0; t < T; ++t) {
                         const int y = labels[b * T + t];
                         const double k = g[0] * weights[y] / n;
                         for (std::size_t c = 0; c < C; ++c) {
                           const std::size_t i = (b * C + c) * T + t;
                           gz[i] += k * ((*probs)[i] - (int(c) == y ? 1.0 : 0.0));
                         }
                       }
                     }
                   });
}

// ---- Adam ------------------------------------------------------------------------

AdamState adam_init(const std::vector<NamedParameter>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(const std::vector<NamedParameter>& params, AdamState& state,
               const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(state.m.size()) +
                        " tensors, model has " + std::to_string(params.size()));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    auto w = t.mutable_data();
    if (state.m[i].size() != w.size()) {
      throw ContractError("optimizer state shape mismatch for " + params[i].name);
    }
    const auto g = params[i].tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---- data ------------------------------------------------------------------------

std::vector<Example> load_examples(const std::vector<ManifestEntry>& entries,
                                   const FrontendConfig& frontend, int workers) {
  std::vector<Example> out(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const auto& e = entries[i];
    Example ex;
    ex.id = e.audio;
    ex.keyword = e.keyword;
    Waveform w;
    try {
      w = read_wav(e.audio);
      ex.labels = read_labels(e.labels);
      ex.features = compute_features(w, frontend);
    } catch (const IoError& err) {
      throw DataError(e.audio + ": " + err.what());
    } catch (const LengthError& err) {
      throw DataError(e.audio + ": " + err.what());
    } catch (const RateError& err) {
      throw DataError(e.audio + ": " + err.what());
    }
    if (ex.labels.size() != ex.features.n_frames) {
      throw DataError(e.audio + ": " + std::to_string(ex.labels.size()) + " labels for " +
                      std::to_string(ex.features.n_frames) + " feature frames");
    }
    ex.seconds = w.seconds();
    out[i] = std::move(ex);
  });
  return out;
}

namespace {

std::size_t count_correct(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t C = logits.dim(1), T = logits.dim(2);
  const auto z = logits.data();
  std::size_t correct = 0;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (z[c * T + t] > z[best * T + t]) best = c;
    }
    correct += static_cast<int>(best) == labels[t];
  }
  return correct;
}

}  // namespace

EpochMetrics score_examples(const Model& model, const std::vector<Example>& examples,
                            const std::vector<double>& class_weights) {
  NoGradGuard ng;
  double loss = 0.0;
  std::size_t frames = 0, correct = 0;
  for (const auto& ex : examples) {
    const Tensor logits = model.forward(ex.features.to_tensor());
    loss += weighted_ce(logits, ex.labels, class_weights).item() * double(ex.labels.size());
    correct += count_correct(logits, ex.labels);
    frames += ex.labels.size();
  }
  EpochMetrics m;
  m.loss = frames ? loss / double(frames) : 0.0;
  m.frame_accuracy = frames ? double(correct) / double(frames) : 0.0;
  return m;
}

BatchStats accumulate_batch(const Model& model, const std::vector<const Example*>& batch,
                            const std::vector<double>& class_weights) {
  for (const auto& p : model.parameters()) p.tensor.zero_grad();
  BatchStats out;
  for (const Example* ex : batch) out.frames += ex->labels.size();
  if (out.frames == 0) return out;
  for (const Example* ex : batch) {
    const Tensor logits = model.forward(ex->features.to_tensor());
    const Tensor loss = weighted_ce(logits, ex->labels, class_weights);
    const double share = double(ex->labels.size()) / double(out.frames);
    backward(scale(loss, share));
    out.loss += loss.item() * share;
    out.correct += count_correct(logits, ex->labels);
  }
  return out;
}

void write_metrics_line(const EpochMetrics& m, std::ostream& os) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["split"] = m.split;
  j["loss"] = m.loss;
  j["frame_accuracy"] = m.frame_accuracy;
  os << j.dump() << '\n';
}

TrainResult train(Model& model, const std::vector<Example>& train_set, const TrainConfig& cfg,
                  const std::vector<Example>& valid) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("training set is empty");
  const auto params = model.parameters();
  AdamState state = adam_init(params);
  std::ofstream log;
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir + ": " + ec.message());
    const auto path = (fs::path(cfg.out_dir) / "metrics.jsonl").string();
    log.open(path);
    if (!log) throw IoError("cannot open metrics log: " + path);
  }

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t frames = 0, correct = 0;
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const BatchStats b = accumulate_batch(model, batch, cfg.class_weights);
      adam_step(params, state, cfg);
      loss_sum += b.loss * double(b.frames);
      frames += b.frames;
      correct += b.correct;
    }

    EpochMetrics m{epoch, "train", loss_sum / double(frames), double(correct) / double(frames)};
    result.history.push_back(m);
    if (log.is_open()) write_metrics_line(m, log);
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %d train loss %.4f acc %.4f\n", epoch, m.loss, m.frame_accuracy);
    }
    if (!valid.empty()) {
      EpochMetrics vm = score_examples(model, valid, cfg.class_weights);
      vm.epoch = epoch;
      vm.split = "valid";
      result.history.push_back(vm);
      if (log.is_open()) write_metrics_line(vm, log);
      if (cfg.verbose) {
        std::fprintf(stderr, "epoch %d valid loss %.4f acc %.4f\n", epoch, vm.loss,
                     vm.frame_accuracy);
      }
    }
    if (!cfg.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%02d.kspt", epoch);
      const auto path = (fs::path(cfg.out_dir) / name).string();
      save_checkpoint(model, path);
      result.checkpoints.push_back(path);
    }
  }
  if (log.is_open()) {
    log.flush();
    if (!log) throw IoError("failed writing metrics log in " + cfg.out_dir);
  }
  return result;
}

}  // namespace kanspot
