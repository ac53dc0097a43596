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

// Keyword detection from per-frame subword posteriors.
//
// Each keyword is a left-to-right chain of subword states. A subword lasts at
// least min_duration frames (min_duration sub-states, the last one
// self-looping). A path may enter the first subword at any frame, which
// plays the role of the absorbing background state. Updates are max-product
// in log space; a path's score is its summed log posterior, and the reported
// score at frame t is exp(score / path length) of the best path ending in the
// final state at t. Equal scores prefer the longer path.
//
// Emission: a score >= floor opens a window of `window` frames; when it
// closes the window maximum is emitted as one event, and no new window opens
// within `window` frames of that event.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kanspot/keywords.hpp"

namespace kanspot {

struct DecoderParams {
  int min_duration = 3;          // frames per subword
  double floor = 0.05;           // emission floor on the normalised score
  int window = 30;               // debounce window in frames
  double posterior_floor = 1e-12;
  double sum_tolerance = 1e-6;   // allowed |sum(frame) - 1|

  void validate() const;
};

struct DetectionEvent {
  std::string keyword;
  std::size_t frame_index = 0;
  double score = 0.0;  // in [0, 1]

  bool operator==(const DetectionEvent&) const = default;
};

class KeywordDecoder {
 public:
  explicit KeywordDecoder(KeywordSpec spec, DecoderParams params = {});

  // Advances over frames, a row-major [n x 13] block of posteriors, and
  // appends any completed events. Throws ContractError for a frame that is
  // not a distribution.
  void feed(std::span<const double> frames, std::vector<DetectionEvent>& events);
  // Emits the pending window, if any.
  void finish(std::vector<DetectionEvent>& events);
  void reset();

  // State after the most recent frame.
  double last_score() const { return last_score_; }      // 0 when unreachable
  double last_log_score() const { return last_raw_; }    // -inf when unreachable
  std::size_t last_path_length() const { return last_len_; }
  std::size_t frames_seen() const { return t_; }

  const KeywordSpec& spec() const { return spec_; }

 private:
  void step(std::span<const double> frame, std::vector<DetectionEvent>& events);

  KeywordSpec spec_;
  DecoderParams params_;
  std::vector<double> raw_;       // [n_subwords x min_duration]
  std::vector<std::size_t> len_;
  std::vector<double> next_raw_;
  std::vector<std::size_t> next_len_;
  std::size_t t_ = 0;
  double last_score_ = 0.0;
  double last_raw_ = 0.0;
  std::size_t last_len_ = 0;

  bool window_open_ = false;
  std::size_t window_start_ = 0;
  std::size_t best_frame_ = 0;
  double best_score_ = 0.0;
  bool have_emitted_ = false;
  std::size_t last_event_frame_ = 0;
};

// Checks one frame: 13 finite non-negative entries summing to 1.
void check_posterior_frame(std::span<const double> frame, double tolerance = 1e-6);

// Per-frame normalised scores for one keyword over [T x 13] posteriors.
std::vector<double> score_trace(std::span<const double> frames, const KeywordSpec& spec,
                                const DecoderParams& params = {});

// All events of one keyword over a complete stream.
std::vector<DetectionEvent> decode_stream(std::span<const double> frames, const KeywordSpec& spec,
                                          const DecoderParams& params = {});

// Events for every keyword, ordered by frame then keyword list order.
std::vector<DetectionEvent> decode_utterance(std::span<const double> frames,
                                             const std::vector<KeywordSpec>& keywords,
                                             const DecoderParams& params = {});

// Highest event score for `keyword`, or 0 without events.
double max_event_score(const std::vector<DetectionEvent>& events, const std::string& keyword);

// ---- operating points ----------------------------------------------------------

// An utterance is accepted when its score is strictly above the threshold.
struct OperatingPoint {
  double target_fa_per_hour = 0.0;
  double threshold = 0.0;
  double fa_per_hour = 0.0;
  double frr = 0.0;

  bool operator==(const OperatingPoint&) const = default;
};

// Per-utterance scores in, one point per target. Each threshold is the
// lowest one whose false accepts per hour stay <= the target. FRR is 0 when
// there are no positives. neg_hours must be > 0.
std::vector<OperatingPoint> sweep_threshold(const std::vector<double>& pos_scores,
                                            const std::vector<double>& neg_scores,
                                            double neg_hours, const std::vector<double>& targets);

struct DetPoint {
  double threshold = 0.0;
  double fa_per_hour = 0.0;
  double frr = 0.0;

  bool operator==(const DetPoint&) const = default;
};
using DetCurve = std::vector<DetPoint>;

// One point per distinct negative score and at 0, ordered by strictly
// increasing FA/h.
DetCurve det_curve(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores,
                   double neg_hours);

// ---- export ---------------------------------------------------------------------

// One JSON object per line: keyword, frame, time_s (frame x 10 ms), score.
void write_events_jsonl(const std::vector<DetectionEvent>& events, const std::string& path);
// Header line then keyword, frame, time_s, score per line.
void write_events_tsv(const std::vector<DetectionEvent>& events, const std::string& path);

}  // namespace kanspot
