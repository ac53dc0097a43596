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

// Frame-level weighted cross-entropy training with Adam.
//
// A batch holds batch_size utterances. Each utterance runs forward and
// backward on its own (no padding); its loss is scaled by its share of the
// batch's frames, so the accumulated gradient is that of the mean loss over
// all frames in the batch. One Adam step follows each batch.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kanspot/encoder.hpp"
#include "kanspot/frontend.hpp"
#include "kanspot/tensor.hpp"

namespace kanspot {

// 1 for SIL, 2 for FILLER, 8 for every subword.
std::vector<double> default_class_weights();

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  int batch_size = 16;
  int epochs = 10;
  std::vector<double> class_weights = default_class_weights();
  std::uint64_t seed = 1;  // shuffle order
  std::string out_dir;     // metrics.jsonl and epoch_NN.kspt when set
  bool verbose = false;    // one progress line per epoch on stderr

  void validate() const;
};

// logits [B x C x T], labels row-major [B x T], weights [C] ->
// mean over frames of weights[y] * -log softmax(logits)[y].
Tensor weighted_ce(const Tensor& logits, const std::vector<int>& labels,
                   const std::vector<double>& weights);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

AdamState adam_init(const std::vector<NamedParameter>& params);

// Bias-corrected Adam update from each parameter's accumulated gradient
// (a parameter without a gradient counts as zero). Increments state.step.
void adam_step(const std::vector<NamedParameter>& params, AdamState& state,
               const TrainConfig& cfg);

struct Example {
  std::string id;       // audio path
  std::string keyword;  // keyword name or NEGATIVE
  FeatureMatrix features;
  std::vector<int> labels;
  double seconds = 0.0;
};

// Reads audio and labels and computes features on `workers` threads.
// Throws DataError naming the utterance for missing audio or a label count
// that differs from the frame count.
std::vector<Example> load_examples(const std::vector<ManifestEntry>& entries,
                                   const FrontendConfig& frontend = {}, int workers = 1);

struct EpochMetrics {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double frame_accuracy = 0.0;
};

// Frame-weighted loss and accuracy without recording gradients.
EpochMetrics score_examples(const Model& model, const std::vector<Example>& examples,
                            const std::vector<double>& class_weights);

struct BatchStats {
  double loss = 0.0;  // mean over the batch's frames
  std::size_t frames = 0;
  std::size_t correct = 0;
};

// Zeroes the model's gradients, then runs forward and backward on each
// utterance with its loss scaled by its share of the batch's frames.
BatchStats accumulate_batch(const Model& model, const std::vector<const Example*>& batch,
                            const std::vector<double>& class_weights);

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::vector<std::string> checkpoints;
};

// Train metrics come from the forward passes made during the epoch. When
// `valid` is non-empty it is scored after every epoch.
TrainResult train(Model& model, const std::vector<Example>& train_set, const TrainConfig& cfg,
                  const std::vector<Example>& valid = {});

void write_metrics_line(const EpochMetrics& m, std::ostream& os);

}  // namespace kanspot
