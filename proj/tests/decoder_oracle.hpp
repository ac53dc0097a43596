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

// Exhaustive keyword scoring by segmentation, independent of the streaming
// state machine, plus random posterior streams.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "kanspot/keywords.hpp"

namespace kanspot::testing {

struct OracleScore {
  double raw = -std::numeric_limits<double>::infinity();
  std::size_t length = 0;
  double score = 0.0;
};

// For every end frame t: over all start frames s and all ways to split s..t
// into the keyword's subwords (each at least min_dur frames), the best summed
// log posterior; equal sums prefer the earlier start.
inline std::vector<OracleScore> oracle_scores(const std::vector<double>& post, std::size_t T,
                                              const KeywordSpec& kw, std::size_t min_dur = 3,
                                              double floor = 1e-12) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::size_t N = kw.subword_ids.size();
  // prefix[n][j] = sum of log p(subword n) over frames 0..j-1
  std::vector<std::vector<double>> prefix(N, std::vector<double>(T + 1, 0.0));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < T; ++j) {
      prefix[n][j + 1] =
          prefix[n][j] + std::log(std::max(post[j * kNumClasses + kw.subword_ids[n]], floor));
    }
  }
  std::vector<OracleScore> out(T);
  for (std::size_t s = 0; s < T; ++s) {
    // best[n][j]: first n subwords cover frames s..j-1 exactly.
    std::vector<std::vector<double>> best(N + 1, std::vector<double>(T + 1, ninf));
    best[0][s] = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
      for (std::size_t j = s + 1; j <= T; ++j) {
        double b = ninf;
        for (std::size_t i = s; i + min_dur <= j; ++i) {
          if (best[n - 1][i] == ninf) continue;
          b = std::max(b, best[n - 1][i] + (prefix[n - 1][j] - prefix[n - 1][i]));
        }
        best[n][j] = b;
      }
    }
    for (std::size_t t = s; t < T; ++t) {
      const double raw = best[N][t + 1];
      if (raw == ninf) continue;
      auto& o = out[t];
      if (raw > o.raw) {  // s ascends, so a tie keeps the longer path
        o.raw = raw;
        o.length = t - s + 1;
      }
    }
  }
  for (auto& o : out) {
    if (o.length > 0) o.score = std::exp(o.raw / double(o.length));
  }
  return out;
}

// [T x 13] posteriors with a random sharpness per frame.
inline std::vector<double> random_posteriors(std::size_t T, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> sharp(0.5, 4.0);
  std::vector<double> p(T * kNumClasses);
  for (std::size_t t = 0; t < T; ++t) {
    const double k = sharp(rng);
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      p[t * kNumClasses + c] = std::exp(k * g(rng));
      total += p[t * kNumClasses + c];
    }
    for (int c = 0; c < kNumClasses; ++c) p[t * kNumClasses + c] /= total;
  }
  return p;
}

}  // namespace kanspot::testing
