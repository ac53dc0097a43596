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

#include "kanspot/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "kanspot/error.hpp"
#include "kanspot/parallel.hpp"

namespace kanspot {

namespace {

std::uint64_t name_hash(const std::string& id) {
  // FNV-1a over the file name, so relocating the corpus keeps the draws.
  const std::string name = std::filesystem::path(id).filename().string();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string join_targets(const std::vector<double>& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) out += (i ? "," : "") + fmt("%g", t[i]);
  return out;
}

}  // namespace

std::vector<double> softmax_frames(const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) != 1) {
    throw DimensionError("expected [1 x C x T] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t C = logits.dim(1), T = logits.dim(2);
  const auto z = logits.data();
  std::vector<double> out(T * C);
  for (std::size_t t = 0; t < T; ++t) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, z[c * T + t]);
    double se = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      out[t * C + c] = std::exp(z[c * T + t] - mx);
      se += out[t * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) out[t * C + c] /= se;
  }
  return out;
}

Waveform noisy_version(const Waveform& clean, const std::string& id,
                       const std::vector<Waveform>& bank, const EvalOptions& opts) {
  if (bank.empty()) throw ContractError("noise bank is empty");
  std::mt19937_64 rng(stream_seed(opts.seed, name_hash(id)));
  const Waveform& src = bank[rng() % bank.size()];
  if (src.samples.empty()) throw ContractError("noise bank holds an empty waveform");
  const std::size_t offset = rng() % src.samples.size();
  const double snr = opts.snr_db ? *opts.snr_db : draw_snr(rng);
  Waveform noise;
  noise.sample_rate = src.sample_rate;
  noise.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < noise.samples.size(); ++i) {
    noise.samples[i] = src.samples[(offset + i) % src.samples.size()];
  }
  return mix_at_snr(clean, noise, snr);
}

std::vector<UtterancePosteriors> compute_posteriors(const Model& model,
                                                    const std::vector<ManifestEntry>& entries,
                                                    const EvalOptions& opts) {
  std::vector<Waveform> bank;
  if (opts.noisy) bank = make_noise_bank(opts.seed, opts.noise_count, 10.0);
  std::vector<UtterancePosteriors> out(entries.size());
  parallel_for(entries.size(), opts.workers, [&](std::size_t i) {
    const auto& e = entries[i];
    Waveform w;
    FeatureMatrix f;
    try {
      w = read_wav(e.audio);
      if (opts.noisy) w = noisy_version(w, e.audio, bank, opts);
      f = compute_features(w, opts.frontend);
    } catch (const IoError& err) {
      throw DataError(e.audio + ": " + err.what());
    } catch (const LengthError& err) {
      throw DataError(e.audio + ": " + err.what());
    } catch (const RateError& err) {
      throw DataError(e.audio + ": " + err.what());
    }
    NoGradGuard ng;
    UtterancePosteriors u;
    u.id = e.audio;
    u.keyword = e.keyword;
    u.seconds = w.seconds();
    u.n_frames = f.n_frames;
    u.posteriors = softmax_frames(model.forward(f.to_tensor()));
    out[i] = std::move(u);
  });
  return out;
}

EvalReport evaluate_posteriors(const std::vector<UtterancePosteriors>& utts,
                               const std::vector<KeywordSpec>& keywords,
                               const EvalOptions& opts) {
  EvalReport r;
  r.targets = opts.targets;
  r.seed = opts.seed;
  r.condition = opts.noisy ? "noisy" : "clean";
  if (opts.noisy) r.snr_db = opts.snr_db;
  for (const auto& k : keywords) k.validate();
  for (const auto& u : utts) {
    if (u.keyword == kNegative) {
      ++r.n_negative;
      r.negative_hours += u.seconds / 3600.0;
    } else {
      find_keyword(keywords, u.keyword);  // rejects unknown labels
    }
  }
  if (!(r.negative_hours > 0.0)) throw ContractError("evaluation set has no negative audio");

  // scores[i][k]: best event score of keyword k in utterance i.
  std::vector<std::vector<double>> scores(utts.size());
  parallel_for(utts.size(), opts.workers, [&](std::size_t i) {
    const auto events = decode_utterance(utts[i].posteriors, keywords, opts.decoder);
    scores[i].resize(keywords.size());
    for (std::size_t k = 0; k < keywords.size(); ++k) {
      scores[i][k] = max_event_score(events, keywords[k].name);
    }
  });

  std::size_t total_pos = 0, with_pos = 0;
  r.pooled_frr.assign(opts.targets.size(), 0.0);
  r.mean_frr.assign(opts.targets.size(), 0.0);
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      if (utts[i].keyword == kNegative) {
        neg.push_back(scores[i][k]);
      } else if (utts[i].keyword == keywords[k].name) {
        pos.push_back(scores[i][k]);
      }
    }
    KeywordResult kr;
    kr.keyword = keywords[k].name;
    kr.n_positive = pos.size();
    kr.points = sweep_threshold(pos, neg, r.negative_hours, opts.targets);
    kr.det = det_curve(pos, neg, r.negative_hours);
    for (std::size_t j = 0; j < opts.targets.size(); ++j) {
      r.pooled_frr[j] += kr.points[j].frr * double(pos.size());
      if (!pos.empty()) r.mean_frr[j] += kr.points[j].frr;
    }
    total_pos += pos.size();
    with_pos += !pos.empty();
    r.keywords.push_back(std::move(kr));
  }
  for (std::size_t j = 0; j < opts.targets.size(); ++j) {
    if (total_pos) r.pooled_frr[j] /= double(total_pos);
    if (with_pos) r.mean_frr[j] /= double(with_pos);
  }
  return r;
}

EvalReport evaluate(const Model& model, const std::vector<ManifestEntry>& entries,
                    const std::vector<KeywordSpec>& keywords, const EvalOptions& opts) {
  EvalReport r = evaluate_posteriors(compute_posteriors(model, entries, opts), keywords, opts);
  r.variant = variant_name(model.config().variant);
  r.width = model.config().w;
  r.param_count = model.param_count();
  return r;
}

// ---- report ----------------------------------------------------------------------

void write_report(const EvalReport& r, std::ostream& os) {
  os << "variant=" << r.variant << '\n'
     << "width=" << r.width << '\n'
     << "param_count=" << r.param_count << '\n'
     << "condition=" << r.condition << '\n'
     << "snr_db=" << (r.condition != "noisy" ? "none" : r.snr_db ? fmt("%g", *r.snr_db) : "drawn")
     << '\n'
     << "seed=" << r.seed << '\n'
     << "n_negative=" << r.n_negative << '\n'
     << "negative_hours=" << fmt("%.6f", r.negative_hours) << '\n'
     << "fa_per_hour_targets=" << join_targets(r.targets) << '\n';
  os << "\n# FRR (%) at FA/h\n";
  os << "keyword\tn_positive";
  for (double t : r.targets) os << "\tfrr@" << fmt("%g", t);
  os << '\n';
  std::size_t total = 0;
  for (const auto& k : r.keywords) {
    os << k.keyword << '\t' << k.n_positive;
    for (const auto& p : k.points) os << '\t' << fmt("%.2f", 100.0 * p.frr);
    os << '\n';
    total += k.n_positive;
  }
  os << "pooled\t" << total;
  for (double f : r.pooled_frr) os << '\t' << fmt("%.2f", 100.0 * f);
  os << "\nmean\t" << total;
  for (double f : r.mean_frr) os << '\t' << fmt("%.2f", 100.0 * f);
  os << "\n\n# thresholds\nkeyword";
  for (double t : r.targets) os << "\tthr@" << fmt("%g", t);
  os << '\n';
  for (const auto& k : r.keywords) {
    os << k.keyword;
    for (const auto& p : k.points) os << '\t' << fmt("%.6f", p.threshold);
    os << '\n';
  }
}

void write_report(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open report for writing: " + path);
  write_report(report, os);
  if (!os) throw IoError("failed writing report: " + path);
}

void emit_det(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open DET file for writing: " + path);
  bool first = true;
  for (const auto& k : report.keywords) {
    if (!first) os << '\n';
    first = false;
    os << "# keyword: " << k.keyword << "\nfa_per_hour,frr_percent\n";
    for (const auto& p : k.det) {
      os << fmt("%.17g", p.fa_per_hour) << ',' << fmt("%.17g", 100.0 * p.frr) << '\n';
    }
  }
  if (!os) throw IoError("failed writing DET file: " + path);
}

std::vector<DetSeries> read_det(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open DET file: " + path);
  std::vector<DetSeries> out;
  std::string line;
  std::size_t lineno = 0;
  const std::string tag = "# keyword: ";
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "fa_per_hour,frr_percent") continue;
    if (line.rfind(tag, 0) == 0) {
      out.push_back({line.substr(tag.size()), {}});
      continue;
    }
    const auto comma = line.find(',');
    if (out.empty() || comma == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": unexpected line");
    }
    try {
      std::size_t used_a = 0, used_b = 0;
      const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
      const double fa = std::stod(a, &used_a), frr = std::stod(b, &used_b);
      if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing");
      out.back().points.emplace_back(fa, frr);
    } catch (const std::logic_error&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

// ---- sweep -----------------------------------------------------------------------

std::vector<SweepRow> variant_sweep(const std::vector<std::size_t>& budgets,
                                    const std::vector<Variant>& variants,
                                    const std::vector<Example>& train_set,
                                    const std::vector<ManifestEntry>& eval_entries,
                                    const SweepSetup& setup) {
  std::vector<SweepRow> rows;
  for (std::size_t budget : budgets) {
    for (Variant v : variants) {
      SweepRow row;
      row.budget = budget;
      row.variant = variant_name(v);
      VariantConfig cfg = setup.base;
      cfg.variant = v;
      try {
        cfg.w = width_for_budget(cfg, budget);
      } catch (const InfeasibleError& e) {
        row.feasible = false;
        row.note = e.what();
        std::cerr << "warning: skipping " << row.variant << " at budget " << budget << ": "
                  << e.what() << '\n';
        rows.push_back(row);
        continue;
      }
      Model model(cfg, setup.model_seed);
      row.width = cfg.w;
      row.param_count = model.param_count();
      TrainConfig tc = setup.train;
      tc.out_dir.clear();
      train(model, train_set, tc);
      row.frr = evaluate(model, eval_entries, setup.keywords, setup.eval).pooled_frr;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::vector<double>& targets,
                       std::ostream& os) {
  os << "budget\tvariant\tw\tparams";
  for (double t : targets) os << "\tfrr@" << fmt("%g", t);
  os << '\n';
  for (const auto& r : rows) {
    os << r.budget << '\t' << r.variant << '\t';
    if (!r.feasible) {
      os << "-\t-";
      for (std::size_t j = 0; j < targets.size(); ++j) os << "\t-";
      os << "\t# skipped: " << r.note << '\n';
      continue;
    }
    os << r.width << '\t' << r.param_count;
    for (double f : r.frr) os << '\t' << fmt("%.2f", 100.0 * f);
    os << '\n';
  }
}

}  // namespace kanspot
