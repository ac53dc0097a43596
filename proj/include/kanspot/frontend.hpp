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

// Audio front end: log Mel filterbank features, WAV and manifest I/O,
// noise mixing, speed perturbation and the synthetic keyword corpus.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kanspot/keywords.hpp"
#include "kanspot/tensor.hpp"

namespace kanspot {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = kSampleRate;

  double seconds() const { return double(samples.size()) / sample_rate; }
};

struct FrontendConfig {
  int n_mels = 40;
  int window = 400;  // 25 ms
  int hop = 160;     // 10 ms
  int n_fft = 512;
  double f_min = 20.0;
  double f_max = 7600.0;
  double log_floor = 1e-10;
  bool cmvn = true;  // per-utterance mean/variance normalisation

  void validate() const;
};

// Row-major [n_mels x n_frames].
struct FeatureMatrix {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<double> data;

  double at(std::size_t mel, std::size_t frame) const { return data[mel * n_frames + frame]; }
  // [1 x n_mels x n_frames]
  Tensor to_tensor() const;
};

// floor((n - window) / hop) + 1, or 0 when n < window.
std::size_t frame_count(std::size_t n_samples, const FrontendConfig& cfg = {});

// Centre frequency (Hz) of each triangular filter.
std::vector<double> mel_center_frequencies(const FrontendConfig& cfg = {});

// Hann window, |FFT|^2, triangular Mel filters, natural log floored at
// cfg.log_floor. Never applies CMVN. Throws RateError for a rate other
// than 16 kHz and LengthError for fewer samples than one window.
FeatureMatrix logmel(const Waveform& w, const FrontendConfig& cfg = {});

// Per-row mean removal and unit variance (std floored at 1e-5).
void apply_cmvn(FeatureMatrix& f);

// logmel followed by CMVN when cfg.cmvn is set.
FeatureMatrix compute_features(const Waveform& w, const FrontendConfig& cfg = {});

// 16-bit PCM mono. Reading rejects other formats with DataError; a missing
// file is an IoError. Both name the path.
Waveform read_wav(const std::string& path);
void write_wav(const Waveform& w, const std::string& path);

// ---- augmentation ----------------------------------------------------------

struct MixResult {
  Waveform mixed;
  double noise_gain = 0.0;  // applied to the (tiled) noise before summing
  double peak_scale = 1.0;  // < 1 when the sum was peak-normalised
};

// Scales the noise, tiled to the clean length, so the clean-to-noise power
// ratio is snr_db, adds it and peak-normalises if any sample exceeds 1.
// Throws ContractError for a silent clean or noise signal.
MixResult mix_at_snr_detailed(const Waveform& clean, const Waveform& noise, double snr_db);
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

// 10 log10(P(a) / P(b)).
double power_ratio_db(const std::vector<double>& a, const std::vector<double>& b);

struct SnrDistribution {
  double mean = 12.5;
  double stddev = 5.0;
  double lo = 0.0;
  double hi = 25.0;
};

// Normal draw restricted to [lo, hi] by rejection.
double draw_snr(std::mt19937_64& rng, const SnrDistribution& d = {});

// Linear-interpolation resampling to round(n / factor) samples. A factor
// below 1 slows the audio down. factor must lie in [0.8, 1.2].
Waveform speed_perturb(const Waveform& w, double factor);

// Independent stream seed for one utterance.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t utterance_id);

// Deterministic synthetic background noises of `seconds` each, cycling
// through white, brown, hum and babble-like textures.
std::vector<Waveform> make_noise_bank(std::uint64_t seed, std::size_t count, double seconds);

// ---- manifests ---------------------------------------------------------------

// One line per utterance: audio path, keyword name or NEGATIVE, label path,
// tab separated. Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string audio;
  std::string keyword;
  std::string labels;

  bool is_negative() const { return keyword == kNegative; }
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
// Writes paths relative to the manifest's directory when they lie below it.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

// Space-separated class ids on one line.
std::vector<int> read_labels(const std::string& path);
void write_labels(const std::vector<int>& labels, const std::string& path);

// ---- synthetic corpus --------------------------------------------------------

// Every subword class is a jittered tone pair, FILLER is a random chord and
// SIL is a faint noise floor. Frame labels come from the segment under each
// frame's centre sample.
struct SynthSpec {
  std::string out_dir;
  std::uint64_t seed = 1;
  int positives = 100;  // round-robin over keywords
  double negative_hours = 0.05;
  double negative_clip_seconds = 3.0;
  std::vector<KeywordSpec> keywords = default_keywords();
  double noise_floor = 0.002;
  int workers = 1;

  void validate() const;
};

struct SynthResult {
  std::string manifest_path;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

// Writes audio/, labels/ and manifest.tsv under spec.out_dir.
SynthResult synth_dataset(const SynthSpec& spec);

// The tone pair used for a subword class.
std::pair<double, double> subword_tones(int class_id);

}  // namespace kanspot
