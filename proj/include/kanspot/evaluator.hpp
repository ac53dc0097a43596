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

// Utterance-level evaluation: FRR at fixed FA/h, DET curves and the
// budget-matched variant sweep.
//
// Every utterance gets one score per keyword, the best event score the
// decoder emitted for it (0 without events). Positives of keyword k are the
// utterances labelled k; negatives for every keyword are the NEGATIVE
// utterances, whose total duration gives the FA/h denominator.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kanspot/decoder.hpp"
#include "kanspot/encoder.hpp"
#include "kanspot/frontend.hpp"
#include "kanspot/keywords.hpp"
#include "kanspot/trainer.hpp"

namespace kanspot {

inline const std::vector<double>& default_fa_targets() {
  static const std::vector<double> t{0.1, 0.2, 0.5, 1.0};
  return t;
}

struct EvalOptions {
  std::vector<double> targets = default_fa_targets();
  DecoderParams decoder;
  FrontendConfig frontend;
  bool noisy = false;
  std::optional<double> snr_db;  // noisy only; drawn per utterance when unset
  std::uint64_t seed = 1;        // noise choice, offset and SNR per utterance
  std::size_t noise_count = 8;
  int workers = 1;
};

struct UtterancePosteriors {
  std::string id;
  std::string keyword;
  double seconds = 0.0;
  std::size_t n_frames = 0;
  std::vector<double> posteriors;  // [n_frames x 13]
};

struct KeywordResult {
  std::string keyword;
  std::size_t n_positive = 0;
  std::vector<OperatingPoint> points;  // one per target
  DetCurve det;

  bool operator==(const KeywordResult&) const = default;
};

struct EvalReport {
  std::string variant;
  int width = 0;
  std::size_t param_count = 0;
  std::string condition = "clean";  // clean | noisy
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  std::size_t n_negative = 0;
  double negative_hours = 0.0;
  std::vector<double> targets;
  std::vector<KeywordResult> keywords;
  std::vector<double> pooled_frr;  // positive-count-weighted mean of keyword FRRs
  std::vector<double> mean_frr;    // plain mean over keywords with positives

  bool operator==(const EvalReport&) const = default;
};

// Frame posteriors [T x 13] from logits [1 x 13 x T].
std::vector<double> softmax_frames(const Tensor& logits);

// Reads (and in the noisy condition, mixes) each utterance, then runs the
// frontend and the model. Missing or malformed audio raises DataError naming
// the path.
std::vector<UtterancePosteriors> compute_posteriors(const Model& model,
                                                    const std::vector<ManifestEntry>& entries,
                                                    const EvalOptions& opts);

// Waveform as heard in the noisy condition for the utterance named `id`.
Waveform noisy_version(const Waveform& clean, const std::string& id,
                       const std::vector<Waveform>& bank, const EvalOptions& opts);

// Decoding and scoring only; metadata fields are left for the caller.
EvalReport evaluate_posteriors(const std::vector<UtterancePosteriors>& utts,
                               const std::vector<KeywordSpec>& keywords, const EvalOptions& opts);

EvalReport evaluate(const Model& model, const std::vector<ManifestEntry>& entries,
                    const std::vector<KeywordSpec>& keywords, const EvalOptions& opts = {});

// key=value header, then one row per keyword plus pooled and mean rows with
// FRR in percent.
void write_report(const EvalReport& report, std::ostream& os);
void write_report(const EvalReport& report, const std::string& path);

// CSV per keyword: "# keyword: <name>", "fa_per_hour,frr_percent", rows.
// Blocks are separated by a blank line.
void emit_det(const EvalReport& report, const std::string& path);

struct DetSeries {
  std::string keyword;
  std::vector<std::pair<double, double>> points;  // (fa_per_hour, frr_percent)
};
std::vector<DetSeries> read_det(const std::string& path);

struct SweepRow {
  std::size_t budget = 0;
  std::string variant;
  bool feasible = true;
  std::string note;  // reason when skipped
  int width = 0;
  std::size_t param_count = 0;
  std::vector<double> frr;  // pooled, per target

  bool operator==(const SweepRow&) const = default;
};

struct SweepSetup {
  VariantConfig base;  // variant and w are overridden per row
  std::uint64_t model_seed = 1;
  TrainConfig train;
  EvalOptions eval;
  std::vector<KeywordSpec> keywords = default_keywords();
};

// For each budget and variant: size to the budget, train, evaluate. An
// infeasible budget yields a skipped row and a warning on stderr.
std::vector<SweepRow> variant_sweep(const std::vector<std::size_t>& budgets,
                                    const std::vector<Variant>& variants,
                                    const std::vector<Example>& train_set,
                                    const std::vector<ManifestEntry>& eval_entries,
                                    const SweepSetup& setup);

void write_sweep_table(const std::vector<SweepRow>& rows, const std::vector<double>& targets,
                       std::ostream& os);

}  // namespace kanspot
