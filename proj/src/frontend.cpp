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

#include "kanspot/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "binio.hpp"
#include "kanspot/error.hpp"
#include "kanspot/parallel.hpp"

namespace kanspot {

namespace fs = std::filesystem;

namespace {

// ---- FFT -------------------------------------------------------------------------

// Plans are created once per size under a lock (planning is not
// thread-safe) and executed on per-call buffers with the new-array API.
class FftPlans {
 public:
  fftw_plan get(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<int, fftw_plan> plans_;
};

FftPlans& fft_plans() {
  static FftPlans* plans = new FftPlans();
  return *plans;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// n_mels + 2 edge frequencies equally spaced on the Mel scale.
std::vector<double> mel_edges(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) hz[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  return hz;
}

// [n_mels x (n_fft/2 + 1)] triangular weights with unit peaks.
std::vector<double> mel_filterbank(const FrontendConfig& cfg) {
  const auto edges = mel_edges(cfg);
  const int bins = cfg.n_fft / 2 + 1;
  std::vector<double> fb(static_cast<std::size_t>(cfg.n_mels) * bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = double(k) * kSampleRate / cfg.n_fft;
      double v = 0.0;
      if (f > left && f <= center) {
        v = (f - left) / (center - left);
      } else if (f > center && f < right) {
        v = (right - f) / (right - center);
      }
      fb[static_cast<std::size_t>(m) * bins + k] = v;
    }
  }
  return fb;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double mean_power(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / double(x.size());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

// ---- features ----------------------------------------------------------------------

void FrontendConfig::validate() const {
  if (n_mels < 1 || window < 1 || hop < 1 || n_fft < window || !(f_min >= 0.0) ||
      !(f_max > f_min) || f_max > kSampleRate / 2.0 || !(log_floor > 0.0)) {
    throw ContractError("invalid front-end config (n_mels=" + std::to_string(n_mels) +
                        " window=" + std::to_string(window) + " hop=" + std::to_string(hop) +
                        " n_fft=" + std::to_string(n_fft) + ")");
  }
}

Tensor FeatureMatrix::to_tensor() const { return Tensor::from_data({1, n_mels, n_frames}, data); }

std::size_t frame_count(std::size_t n_samples, const FrontendConfig& cfg) {
  const auto window = static_cast<std::size_t>(cfg.window);
  if (n_samples < window) return 0;
  return (n_samples - window) / static_cast<std::size_t>(cfg.hop) + 1;
}

std::vector<double> mel_center_frequencies(const FrontendConfig& cfg) {
  cfg.validate();
  const auto edges = mel_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

FeatureMatrix logmel(const Waveform& w, const FrontendConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != kSampleRate) {
    throw RateError("expected 16000 Hz audio, got " + std::to_string(w.sample_rate) + " Hz");
  }
  const std::size_t T = frame_count(w.samples.size(), cfg);
  if (T == 0) {
    throw LengthError("need at least " + std::to_string(cfg.window) + " samples, got " +
                      std::to_string(w.samples.size()));
  }
  const int n = cfg.n_fft, bins = n / 2 + 1;
  std::vector<double> hann(cfg.window);
  for (int i = 0; i < cfg.window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (cfg.window - 1));
  }
  const auto fb = mel_filterbank(cfg);
  fftw_plan plan = fft_plans().get(n);
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
  std::vector<double> power(bins);

  FeatureMatrix f;
  f.n_mels = static_cast<std::size_t>(cfg.n_mels);
  f.n_frames = T;
  f.data.assign(f.n_mels * T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double* frame = w.samples.data() + t * cfg.hop;
    double* buf = in.get();
    for (int i = 0; i < cfg.window; ++i) buf[i] = frame[i] * hann[i];
    std::fill(buf + cfg.window, buf + n, 0.0);
    fftw_execute_dft_r2c(plan, buf, out.get());
    for (int k = 0; k < bins; ++k) {
      power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double* row = fb.data() + static_cast<std::size_t>(m) * bins;
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += row[k] * power[k];
      f.data[m * T + t] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return f;
}

void apply_cmvn(FeatureMatrix& f) {
  for (std::size_t m = 0; m < f.n_mels; ++m) {
    double* row = f.data.data() + m * f.n_frames;
    double mean = 0.0;
    for (std::size_t t = 0; t < f.n_frames; ++t) mean += row[t];
    mean /= double(f.n_frames);
    double var = 0.0;
    for (std::size_t t = 0; t < f.n_frames; ++t) var += (row[t] - mean) * (row[t] - mean);
    const double sd = std::max(std::sqrt(var / double(f.n_frames)), 1e-5);
    for (std::size_t t = 0; t < f.n_frames; ++t) row[t] = (row[t] - mean) / sd;
  }
}

FeatureMatrix compute_features(const Waveform& w, const FrontendConfig& cfg) {
  FeatureMatrix f = logmel(w, cfg);
  if (cfg.cmvn) apply_cmvn(f);
  return f;
}

// ---- WAV ---------------------------------------------------------------------------

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open audio file: " + path);
  try {
    char tag[4];
    auto read_tag = [&] {
      if (!is.read(tag, 4)) throw DataError("truncated header");
      return std::string(tag, 4);
    };
    if (read_tag() != "RIFF") throw DataError("not a RIFF file");
    binio::get<std::uint32_t>(is);
    if (read_tag() != "WAVE") throw DataError("not a WAVE file");
    bool have_fmt = false;
    Waveform w;
    for (;;) {
      const std::string id = read_tag();
      const auto size = binio::get<std::uint32_t>(is);
      if (id == "fmt ") {
        const auto format = binio::get<std::uint16_t>(is);
        const auto channels = binio::get<std::uint16_t>(is);
        w.sample_rate = static_cast<int>(binio::get<std::uint32_t>(is));
        binio::get<std::uint32_t>(is);  // byte rate
        binio::get<std::uint16_t>(is);  // block align
        const auto bits = binio::get<std::uint16_t>(is);
        if (format != 1 || channels != 1 || bits != 16) {
          throw DataError("only 16-bit PCM mono is supported (format " + std::to_string(format) +
                          ", " + std::to_string(channels) + " channels, " +
                          std::to_string(bits) + " bits)");
        }
        if (size > 16) is.seekg(size - 16, std::ios::cur);
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) throw DataError("data chunk before fmt chunk");
        const std::size_t n = size / 2;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          w.samples[i] = binio::get<std::int16_t>(is) / 32768.0;
        }
        return w;
      } else {
        is.seekg(size + (size & 1), std::ios::cur);
      }
    }
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_wav(const Waveform& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open audio file for writing: " + path);
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  binio::put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::put<std::uint32_t>(os, 16);
  binio::put<std::uint16_t>(os, 1);
  binio::put<std::uint16_t>(os, 1);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate * 2));
  binio::put<std::uint16_t>(os, 2);
  binio::put<std::uint16_t>(os, 16);
  os.write("data", 4);
  binio::put<std::uint32_t>(os, data_bytes);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
    binio::put<std::int16_t>(os, static_cast<std::int16_t>(std::lround(c * 32768.0)));
  }
  if (!os) throw IoError("failed writing audio file: " + path);
}

// ---- augmentation -------------------------------------------------------------------

double power_ratio_db(const std::vector<double>& a, const std::vector<double>& b) {
  return 10.0 * std::log10(mean_power(a) / mean_power(b));
}

MixResult mix_at_snr_detailed(const Waveform& clean, const Waveform& noise, double snr_db) {
  const double pc = mean_power(clean.samples);
  if (!(pc > 0.0)) throw ContractError("cannot mix noise into a silent signal");
  if (noise.samples.empty()) throw ContractError("noise signal is empty");
  std::vector<double> tiled(clean.samples.size());
  for (std::size_t i = 0; i < tiled.size(); ++i) tiled[i] = noise.samples[i % noise.samples.size()];
  const double pn = mean_power(tiled);
  if (!(pn > 0.0)) throw ContractError("noise signal is silent");
  MixResult r;
  r.noise_gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  r.mixed.sample_rate = clean.sample_rate;
  r.mixed.samples.resize(tiled.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < tiled.size(); ++i) {
    r.mixed.samples[i] = clean.samples[i] + r.noise_gain * tiled[i];
    peak = std::max(peak, std::abs(r.mixed.samples[i]));
  }
  if (peak > 1.0) {
    r.peak_scale = 1.0 / peak;
    for (double& s : r.mixed.samples) s *= r.peak_scale;
  }
  return r;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  return mix_at_snr_detailed(clean, noise, snr_db).mixed;
}

double draw_snr(std::mt19937_64& rng, const SnrDistribution& d) {
  if (!(d.hi > d.lo) || !(d.stddev > 0.0)) throw ContractError("invalid SNR distribution");
  std::normal_distribution<double> normal(d.mean, d.stddev);
  for (;;) {
    const double v = normal(rng);
    if (v >= d.lo && v <= d.hi) return v;
  }
}

Waveform speed_perturb(const Waveform& w, double factor) {
  if (!(factor >= 0.8 && factor <= 1.2)) {
    throw ContractError("speed factor " + std::to_string(factor) + " outside [0.8, 1.2]");
  }
  Waveform out;
  out.sample_rate = w.sample_rate;
  const std::size_t n = w.samples.size();
  const auto m = static_cast<std::size_t>(std::llround(double(n) / factor));
  out.samples.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double pos = double(j) * factor;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= n) {
      out.samples[j] = n ? w.samples[n - 1] : 0.0;
      continue;
    }
    const double frac = pos - double(i);
    out.samples[j] = w.samples[i] + frac * (w.samples[i + 1] - w.samples[i]);
  }
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t utterance_id) {
  return splitmix64(seed ^ splitmix64(utterance_id + 0x51ed270b7a1f3c4dULL));
}

std::vector<Waveform> make_noise_bank(std::uint64_t seed, std::size_t count, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  std::vector<Waveform> bank(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng(stream_seed(seed, 0xB0000 + k));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto& s = bank[k].samples;
    s.assign(n, 0.0);
    switch (k % 4) {
      case 0:  // white
        for (auto& v : s) v = 0.1 * g(rng);
        break;
      case 1: {  // brown (leaky integrated white)
        double acc = 0.0;
        for (auto& v : s) {
          acc = 0.995 * acc + 0.02 * g(rng);
          v = acc;
        }
        break;
      }
      case 2: {  // mains hum with harmonics
        const double f0 = u(rng) < 0.5 ? 50.0 : 60.0;
        for (std::size_t i = 0; i < n; ++i) {
          double v = 0.0;
          for (int h = 1; h <= 5; ++h) {
            v += 0.05 / h * std::sin(2.0 * std::numbers::pi * f0 * h * i / kSampleRate);
          }
          s[i] = v + 0.005 * g(rng);
        }
        break;
      }
      default: {  // babble: overlapping random chords changing every 200 ms
        const std::size_t seg = kSampleRate / 5;
        for (std::size_t start = 0; start < n; start += seg) {
          for (int voice = 0; voice < 6; ++voice) {
            const double f = 150.0 + 3000.0 * u(rng);
            const double a = 0.02 + 0.03 * u(rng);
            const double ph = 2.0 * std::numbers::pi * u(rng);
            for (std::size_t i = start; i < std::min(n, start + seg); ++i) {
              s[i] += a * std::sin(2.0 * std::numbers::pi * f * i / kSampleRate + ph);
            }
          }
        }
        break;
      }
    }
  }
  return bank;
}

// ---- manifests -----------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return (q.is_absolute() ? q : base / q).lexically_normal().string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(trim(field));
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected <audio>\\t<keyword|NEGATIVE>\\t<labels>");
    }
    out.push_back({resolve(fields[0]), fields[1], resolve(fields[2])});
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  const fs::path base = fs::absolute(fs::path(path)).parent_path().lexically_normal();
  auto rel = [&](const std::string& p) {
    const fs::path abs = fs::absolute(fs::path(p)).lexically_normal();
    const fs::path r = abs.lexically_relative(base);
    if (r.empty() || *r.begin() == "..") return abs.string();
    return r.string();
  };
  std::ofstream os(path);
  if (!os) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& e : entries) os << rel(e.audio) << '\t' << e.keyword << '\t' << rel(e.labels) << '\n';
  if (!os) throw IoError("failed writing manifest: " + path);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open label file: " + path);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0 || v >= kNumClasses) {
      throw DataError(path + ": invalid class id '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

void write_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open label file for writing: " + path);
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? " " : "") << labels[i];
  os << '\n';
  if (!os) throw IoError("failed writing label file: " + path);
}

// ---- synthetic corpus ------------------------------------------------------------------

namespace {

struct Segment {
  int label;
  std::size_t length;  // samples
};

std::size_t seconds_to_samples(double s) { return static_cast<std::size_t>(s * kSampleRate); }

// Adds a tone with 10 ms raised-cosine edges.
void add_tone(std::vector<double>& out, std::size_t begin, std::size_t len, double freq,
              double amp, double phase) {
  const std::size_t ramp = std::min<std::size_t>(160, len / 2);
  for (std::size_t i = 0; i < len; ++i) {
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (len - 1 - i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (len - 1 - i) / ramp);
    out[begin + i] +=
        amp * env * std::sin(2.0 * std::numbers::pi * freq * double(i) / kSampleRate + phase);
  }
}

struct Rendered {
  Waveform audio;
  std::vector<int> labels;
};

Rendered render(const std::vector<Segment>& segs, double noise_floor, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, noise_floor);
  std::size_t total = 0;
  for (const auto& s : segs) total += s.length;
  Rendered r;
  auto& x = r.audio.samples;
  x.assign(total, 0.0);
  for (auto& v : x) v = g(rng);
  std::size_t pos = 0;
  for (const auto& s : segs) {
    if (s.label == kFiller) {
      const int voices = 2 + static_cast<int>(u(rng) * 2.0);
      for (int v = 0; v < voices; ++v) {
        add_tone(x, pos, s.length, 200.0 + 3800.0 * u(rng), 0.05 + 0.15 * u(rng),
                 2.0 * std::numbers::pi * u(rng));
      }
    } else if (s.label >= kFirstSubword) {
      const auto [f1, f2] = subword_tones(s.label);
      const double jitter = 1.0 + 0.06 * (u(rng) - 0.5);
      add_tone(x, pos, s.length, f1 * jitter, 0.15 + 0.15 * u(rng), 2.0 * std::numbers::pi * u(rng));
      add_tone(x, pos, s.length, f2 * jitter, 0.15 + 0.15 * u(rng), 2.0 * std::numbers::pi * u(rng));
    }
    pos += s.length;
  }
  const FrontendConfig cfg;
  const std::size_t T = frame_count(total, cfg);
  r.labels.resize(T);
  std::size_t seg = 0, seg_end = segs.empty() ? 0 : segs[0].length;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t centre = t * cfg.hop + cfg.window / 2;
    while (centre >= seg_end && seg + 1 < segs.size()) seg_end += segs[++seg].length;
    r.labels[t] = segs[seg].label;
  }
  return r;
}

std::vector<Segment> positive_layout(const KeywordSpec& kw, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto dur = [&](double lo, double hi) { return seconds_to_samples(lo + (hi - lo) * u(rng)); };
  std::vector<Segment> segs;
  segs.push_back({kSil, dur(0.15, 0.4)});
  if (u(rng) < 0.5) {
    segs.push_back({kFiller, dur(0.2, 0.6)});
    segs.push_back({kSil, dur(0.05, 0.15)});
  }
  for (int id : kw.subword_ids) segs.push_back({id, dur(0.12, 0.25)});
  segs.push_back({kSil, dur(0.15, 0.4)});
  if (u(rng) < 0.3) {
    segs.push_back({kFiller, dur(0.2, 0.5)});
    segs.push_back({kSil, dur(0.05, 0.15)});
  }
  return segs;
}

// Silence, filler and isolated subwords. A distractor run is always followed
// by silence or filler, so no keyword sequence is ever contiguous.
std::vector<Segment> negative_layout(std::size_t total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> subword(kFirstSubword, kNumClasses - 1);
  auto dur = [&](double lo, double hi) { return seconds_to_samples(lo + (hi - lo) * u(rng)); };
  std::vector<Segment> segs;
  std::size_t len = 0;
  bool after_distractor = false;
  while (len < total) {
    const double r = u(rng);
    std::vector<Segment> next;
    if (!after_distractor && r < 0.2) {
      const int n = 1 + static_cast<int>(u(rng) * 2.0);
      for (int i = 0; i < n; ++i) next.push_back({subword(rng), dur(0.12, 0.25)});
      after_distractor = true;
    } else if (r < 0.55) {
      next.push_back({kSil, dur(0.05, 0.4)});
      after_distractor = false;
    } else {
      next.push_back({kFiller, dur(0.2, 0.8)});
      after_distractor = false;
    }
    for (auto s : next) {
      if (len >= total) break;
      s.length = std::min(s.length, total - len);
      len += s.length;
      segs.push_back(s);
    }
  }
  return segs;
}

}  // namespace

std::pair<double, double> subword_tones(int class_id) {
  if (class_id < kFirstSubword || class_id >= kNumClasses) {
    throw ContractError("class " + std::to_string(class_id) + " is not a subword");
  }
  const int i = class_id - kFirstSubword;
  return {350.0 + 110.0 * i, 1900.0 + 190.0 * ((i * 7) % 11)};
}

void SynthSpec::validate() const {
  if (out_dir.empty()) throw ContractError("synth output directory is empty");
  if (positives < 0) throw ContractError("positive count must be >= 0");
  if (!(negative_hours >= 0.0)) throw ContractError("negative hours must be >= 0");
  if (!(negative_clip_seconds >= 0.1)) throw ContractError("negative clips must be >= 0.1 s");
  if (keywords.empty() && positives > 0) throw ContractError("no keywords to synthesise");
  for (const auto& k : keywords) k.validate();
}

SynthResult synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const fs::path root(spec.out_dir);
  std::error_code ec;
  fs::create_directories(root / "audio", ec);
  if (!ec) fs::create_directories(root / "labels", ec);
  if (ec) throw IoError("cannot create " + spec.out_dir + ": " + ec.message());

  const auto n_pos = static_cast<std::size_t>(spec.positives);
  const auto n_neg =
      static_cast<std::size_t>(std::ceil(spec.negative_hours * 3600.0 / spec.negative_clip_seconds - 1e-9));
  const std::size_t clip = seconds_to_samples(spec.negative_clip_seconds);
  std::vector<ManifestEntry> entries(n_pos + n_neg);

  parallel_for(n_pos + n_neg, spec.workers, [&](std::size_t i) {
    const bool pos = i < n_pos;
    const std::size_t j = pos ? i : i - n_pos;
    std::mt19937_64 rng(stream_seed(spec.seed, pos ? j : 1'000'000'000ULL + j));
    const KeywordSpec* kw = pos ? &spec.keywords[j % spec.keywords.size()] : nullptr;
    const auto segs = pos ? positive_layout(*kw, rng) : negative_layout(clip, rng);
    const Rendered r = render(segs, spec.noise_floor, rng);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%s_%05zu", pos ? "pos" : "neg", j);
    const auto audio = (root / "audio" / (std::string(stem) + ".wav")).string();
    const auto labels = (root / "labels" / (std::string(stem) + ".lab")).string();
    write_wav(r.audio, audio);
    write_labels(r.labels, labels);
    entries[i] = {audio, pos ? kw->name : kNegative, labels};
  });

  SynthResult res;
  res.manifest_path = (root / "manifest.tsv").string();
  res.n_positive = n_pos;
  res.n_negative = n_neg;
  write_manifest(entries, res.manifest_path);
  return res;
}

}  // namespace kanspot
