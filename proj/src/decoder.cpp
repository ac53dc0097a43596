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

#include "kanspot/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "kanspot/error.hpp"

namespace kanspot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Better = higher score, ties to the longer path.
bool better(double raw_a, std::size_t len_a, double raw_b, std::size_t len_b) {
  return raw_a > raw_b || (raw_a == raw_b && len_a > len_b);
}

void check_hours(double neg_hours) {
  if (!(neg_hours > 0.0)) {
    throw ContractError("negative audio duration must be > 0 hours, got " +
                        std::to_string(neg_hours));
  }
}

double frr_at(const std::vector<double>& pos, double threshold) {
  if (pos.empty()) return 0.0;
  std::size_t rejected = 0;
  for (double s : pos) rejected += !(s > threshold);
  return double(rejected) / double(pos.size());
}

std::size_t accepts_at(const std::vector<double>& neg, double threshold) {
  std::size_t n = 0;
  for (double s : neg) n += s > threshold;
  return n;
}

std::string time_str(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", double(frame) * 0.01);
  return buf;
}

}  // namespace

void DecoderParams::validate() const {
  if (min_duration < 1 || window < 1 || !(floor >= 0.0 && floor <= 1.0) ||
      !(posterior_floor > 0.0) || !(sum_tolerance >= 0.0)) {
    throw ContractError("invalid decoder parameters");
  }
}

void check_posterior_frame(std::span<const double> frame, double tolerance) {
  if (frame.size() != static_cast<std::size_t>(kNumClasses)) {
    throw ContractError("posterior frame has " + std::to_string(frame.size()) +
                        " entries, expected 13");
  }
  double total = 0.0;
  for (double p : frame) {
    if (!std::isfinite(p) || p < -tolerance) {
      throw ContractError("posterior frame holds an invalid probability " + std::to_string(p));
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    throw ContractError("posterior frame sums to " + std::to_string(total) + ", not 1");
  }
}

// ---- KeywordDecoder -----------------------------------------------------------------

KeywordDecoder::KeywordDecoder(KeywordSpec spec, DecoderParams params)
    : spec_(std::move(spec)), params_(params) {
  spec_.validate();
  params_.validate();
  reset();
}

void KeywordDecoder::reset() {
  const std::size_t n = spec_.subword_ids.size() * static_cast<std::size_t>(params_.min_duration);
  raw_.assign(n, kNegInf);
  len_.assign(n, 0);
  next_raw_.assign(n, kNegInf);
  next_len_.assign(n, 0);
  t_ = 0;
  last_score_ = 0.0;
  last_raw_ = kNegInf;
  last_len_ = 0;
  window_open_ = false;
  have_emitted_ = false;
}

void KeywordDecoder::feed(std::span<const double> frames, std::vector<DetectionEvent>& events) {
  const auto C = static_cast<std::size_t>(kNumClasses);
  if (frames.size() % C != 0) {
    throw ContractError("posterior block of " + std::to_string(frames.size()) +
                        " values is not a whole number of 13-class frames");
  }
  for (std::size_t i = 0; i < frames.size(); i += C) step(frames.subspan(i, C), events);
}

void KeywordDecoder::step(std::span<const double> frame, std::vector<DetectionEvent>& events) {
  check_posterior_frame(frame, params_.sum_tolerance);
  const std::size_t D = static_cast<std::size_t>(params_.min_duration);
  const std::size_t N = spec_.subword_ids.size();
  for (std::size_t n = 0; n < N; ++n) {
    const double lp = std::log(std::max(frame[spec_.subword_ids[n]], params_.posterior_floor));
    for (std::size_t d = 0; d < D; ++d) {
      const std::size_t s = n * D + d;
      double raw = kNegInf;
      std::size_t len = 0;
      auto consider = [&](double r, std::size_t l) {
        if (r != kNegInf && (raw == kNegInf || better(r, l, raw, len))) {
          raw = r;
          len = l;
        }
      };
      if (s > 0) {
        consider(raw_[s - 1], len_[s - 1]);  // previous sub-state or subword
      } else {
        consider(0.0, 0);  // fresh entry from the background
      }
      if (d == D - 1) consider(raw_[s], len_[s]);
      next_raw_[s] = raw == kNegInf ? kNegInf : raw + lp;
      next_len_[s] = raw == kNegInf ? 0 : len + 1;
    }
  }
  std::swap(raw_, next_raw_);
  std::swap(len_, next_len_);

  const std::size_t t = t_++;
  last_raw_ = raw_.back();
  last_len_ = len_.back();
  last_score_ = last_raw_ == kNegInf ? 0.0 : std::exp(last_raw_ / double(last_len_));

  if (window_open_) {
    if (last_score_ > best_score_) {
      best_score_ = last_score_;
      best_frame_ = t;
    }
  } else if (last_score_ >= params_.floor &&
             (!have_emitted_ || t > last_event_frame_ + static_cast<std::size_t>(params_.window))) {
    window_open_ = true;
    window_start_ = t;
    best_score_ = last_score_;
    best_frame_ = t;
  }
  if (window_open_ && t + 1 - window_start_ >= static_cast<std::size_t>(params_.window)) {
    finish(events);
  }
}

void KeywordDecoder::finish(std::vector<DetectionEvent>& events) {
  if (!window_open_) return;
  events.push_back({spec_.name, best_frame_, best_score_});
  window_open_ = false;
  have_emitted_ = true;
  last_event_frame_ = best_frame_;
}

std::vector<double> score_trace(std::span<const double> frames, const KeywordSpec& spec,
                                const DecoderParams& params) {
  const auto C = static_cast<std::size_t>(kNumClasses);
  if (frames.size() % C != 0) throw ContractError("posterior block is not a whole number of frames");
  KeywordDecoder dec(spec, params);
  std::vector<DetectionEvent> sink;
  std::vector<double> out;
  out.reserve(frames.size() / C);
  for (std::size_t i = 0; i < frames.size(); i += C) {
    dec.feed(frames.subspan(i, C), sink);
    out.push_back(dec.last_score());
  }
  return out;
}

std::vector<DetectionEvent> decode_stream(std::span<const double> frames, const KeywordSpec& spec,
                                          const DecoderParams& params) {
  KeywordDecoder dec(spec, params);
  std::vector<DetectionEvent> events;
  dec.feed(frames, events);
  dec.finish(events);
  return events;
}

std::vector<DetectionEvent> decode_utterance(std::span<const double> frames,
                                             const std::vector<KeywordSpec>& keywords,
                                             const DecoderParams& params) {
  std::vector<std::pair<std::size_t, DetectionEvent>> tagged;
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    for (auto& e : decode_stream(frames, keywords[k], params)) tagged.emplace_back(k, std::move(e));
  }
  std::stable_sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.frame_index, a.first) < std::tie(b.second.frame_index, b.first);
  });
  std::vector<DetectionEvent> out;
  out.reserve(tagged.size());
  for (auto& [k, e] : tagged) out.push_back(std::move(e));
  return out;
}

double max_event_score(const std::vector<DetectionEvent>& events, const std::string& keyword) {
  double best = 0.0;
  for (const auto& e : events) {
    if (e.keyword == keyword) best = std::max(best, e.score);
  }
  return best;
}

// ---- operating points ----------------------------------------------------------------

std::vector<OperatingPoint> sweep_threshold(const std::vector<double>& pos_scores,
                                            const std::vector<double>& neg_scores,
                                            double neg_hours, const std::vector<double>& targets) {
  check_hours(neg_hours);
  std::vector<double> neg(neg_scores);
  std::sort(neg.begin(), neg.end(), std::greater<>());
  std::vector<OperatingPoint> out;
  for (double target : targets) {
    if (!(target >= 0.0)) throw ContractError("FA/h target must be >= 0");
    // Allowed accepts; the small slack absorbs rounding in target * hours.
    const auto allowed = static_cast<std::size_t>(std::floor(target * neg_hours * (1.0 + 1e-12)));
    OperatingPoint p;
    p.target_fa_per_hour = target;
    p.threshold = allowed < neg.size() ? std::max(neg[allowed], 0.0) : 0.0;
    p.fa_per_hour = double(accepts_at(neg, p.threshold)) / neg_hours;
    p.frr = frr_at(pos_scores, p.threshold);
    out.push_back(p);
  }
  return out;
}

DetCurve det_curve(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores,
                   double neg_hours) {
  check_hours(neg_hours);
  std::vector<double> thresholds{0.0};
  for (double s : neg_scores) {
    if (s > 0.0) thresholds.push_back(s);
  }
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  DetCurve curve;
  for (double th : thresholds) {
    curve.push_back({th, double(accepts_at(neg_scores, th)) / neg_hours, frr_at(pos_scores, th)});
  }
  return curve;
}

// ---- export ---------------------------------------------------------------------------

void write_events_jsonl(const std::vector<DetectionEvent>& events, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open event file for writing: " + path);
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["keyword"] = e.keyword;
    j["frame"] = e.frame_index;
    j["time_s"] = double(e.frame_index) * 0.01;
    j["score"] = e.score;
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing event file: " + path);
}

void write_events_tsv(const std::vector<DetectionEvent>& events, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open event file for writing: " + path);
  os << "keyword\tframe\ttime_s\tscore\n";
  char score[32];
  for (const auto& e : events) {
    std::snprintf(score, sizeof(score), "%.9f", e.score);
    os << e.keyword << '\t' << e.frame_index << '\t' << time_str(e.frame_index) << '\t' << score
       << '\n';
  }
  if (!os) throw IoError("failed writing event file: " + path);
}

}  // namespace kanspot
