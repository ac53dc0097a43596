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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kanspot/error.hpp"
#include "kanspot/evaluator.hpp"

using namespace kanspot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kanspot_test_evaluator_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Corpus {
  std::vector<ManifestEntry> entries;
};

const Corpus& corpus() {
  static Corpus c = [] {
    Corpus out;
    SynthSpec spec;
    spec.out_dir = scratch("corpus").string();
    spec.positives = 40;
    spec.negative_hours = 60.0 / 3600.0;
    spec.seed = 8;
    out.entries = read_manifest(synth_dataset(spec).manifest_path);
    return out;
  }();
  return c;
}

VariantConfig tiny(Variant v = Variant::kMlp) {
  VariantConfig c;
  c.variant = v;
  c.w = 8;
  c.e = 2;
  c.n_blocks = 2;
  c.K = 3;
  return c;
}

// Posteriors that put `peak` on the labelled class of every frame.
UtterancePosteriors from_labels(const std::vector<int>& labels, const std::string& keyword,
                                double peak = 0.9) {
  UtterancePosteriors u;
  u.keyword = keyword;
  u.n_frames = labels.size();
  u.seconds = double(labels.size()) * 0.01;
  u.posteriors.assign(labels.size() * kNumClasses, (1.0 - peak) / (kNumClasses - 1));
  for (std::size_t t = 0; t < labels.size(); ++t) u.posteriors[t * kNumClasses + labels[t]] = peak;
  return u;
}

std::vector<int> utterance_labels(const std::vector<int>& subwords, std::size_t seg = 10) {
  std::vector<int> l(20, kSil);
  for (int s : subwords) l.insert(l.end(), seg, s);
  l.insert(l.end(), 20, kSil);
  return l;
}

}  // namespace

TEST_CASE("softmax_frames") {
  const Tensor z = Tensor::from_data({1, 13, 2}, [] {
    std::vector<double> v(26, 0.0);
    v[3 * 2 + 1] = std::log(12.0);  // class 3 at frame 1
    return v;
  }());
  const auto p = softmax_frames(z);
  REQUIRE(p.size() == 26);
  CHECK(p[0] == doctest::Approx(1.0 / 13.0));
  CHECK(p[13 + 3] == doctest::Approx(0.5));
  CHECK(p[13 + 4] == doctest::Approx(0.5 / 12.0));
  CHECK_THROWS_AS(softmax_frames(Tensor::zeros({2, 13, 2})), DimensionError);
}

TEST_CASE("oracle posteriors reject nothing") {
  std::vector<UtterancePosteriors> utts;
  for (const auto& e : corpus().entries) {
    auto u = from_labels(read_labels(e.labels), e.keyword);
    u.id = e.audio;
    u.seconds = read_wav(e.audio).seconds();
    utts.push_back(std::move(u));
  }
  const auto r = evaluate_posteriors(utts, default_keywords(), {});
  REQUIRE(r.pooled_frr.size() == 4);
  for (double f : r.pooled_frr) CHECK(f == 0.0);
  for (const auto& k : r.keywords) {
    CHECK(k.n_positive > 0);
    for (const auto& p : k.points) CHECK(p.frr == 0.0);
  }
  CHECK(r.n_negative == 20);
  CHECK(r.negative_hours == doctest::Approx(60.0 / 3600.0));
}

TEST_CASE("pooled FRR weights keywords by positive count") {
  const auto& kws = default_keywords();
  std::vector<UtterancePosteriors> utts;
  // take_a_picture: two clean hits and one miss; volume_up: one miss.
  utts.push_back(from_labels(utterance_labels({2, 3, 4, 5}), "take_a_picture"));
  utts.push_back(from_labels(utterance_labels({2, 3, 4, 5}), "take_a_picture"));
  utts.push_back(from_labels(utterance_labels({}), "take_a_picture"));
  utts.push_back(from_labels(utterance_labels({}), "volume_up"));
  for (int i = 0; i < 3; ++i) utts.push_back(from_labels(std::vector<int>(1200, kSil), kNegative));
  EvalOptions opts;
  const auto r = evaluate_posteriors(utts, kws, opts);
  CHECK(r.keywords[0].n_positive == 3);
  CHECK(r.keywords[1].n_positive == 1);
  CHECK(r.keywords[2].n_positive == 0);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(r.keywords[0].points[j].frr == doctest::Approx(1.0 / 3.0));
    CHECK(r.keywords[1].points[j].frr == 1.0);
    CHECK(r.keywords[2].points[j].frr == 0.0);
    CHECK(r.pooled_frr[j] == doctest::Approx(0.5));
    CHECK(r.mean_frr[j] == doctest::Approx(2.0 / 3.0));
  }
  CHECK(r.negative_hours == doctest::Approx(36.0 / 3600.0));

  utts.pop_back();
  utts.pop_back();
  utts.pop_back();
  CHECK_THROWS_AS(evaluate_posteriors(utts, kws, opts), ContractError);
  utts.push_back(from_labels(std::vector<int>(100, kSil), "unknown_word"));
  CHECK_THROWS_AS(evaluate_posteriors(utts, kws, opts), ContractError);
}

TEST_CASE("untrained model misses nearly everything") {
  Model model(tiny(), 77);
  EvalOptions opts;
  opts.workers = 2;
  const auto r = evaluate(model, corpus().entries, default_keywords(), opts);
  MESSAGE("random model pooled FRR at 0.1 FA/h: " << r.pooled_frr[0]);
  CHECK(r.pooled_frr[0] >= 0.75);
  for (std::size_t j = 1; j < r.pooled_frr.size(); ++j) {
    CHECK(r.pooled_frr[j] <= r.pooled_frr[j - 1]);
    for (const auto& k : r.keywords) CHECK(k.points[j].frr <= k.points[j - 1].frr);
  }
  CHECK(r.variant == "MLP");
  CHECK(r.width == 8);
  CHECK(r.param_count == model.param_count());
}

TEST_CASE("evaluation is deterministic across runs and worker counts") {
  Model model(tiny(Variant::kGkanPost), 5);
  EvalOptions opts;
  const auto a = evaluate(model, corpus().entries, default_keywords(), opts);
  opts.workers = 3;
  const auto b = evaluate(model, corpus().entries, default_keywords(), opts);
  CHECK(a == b);
  std::ostringstream sa, sb;
  write_report(a, sa);
  write_report(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().find("variant=GKAN_post\n") != std::string::npos);
  CHECK(sa.str().find("condition=clean\n") != std::string::npos);

  opts.noisy = true;
  const auto na = evaluate(model, corpus().entries, default_keywords(), opts);
  opts.workers = 1;
  const auto nb = evaluate(model, corpus().entries, default_keywords(), opts);
  CHECK(na == nb);
  CHECK(na.condition == "noisy");
  CHECK_FALSE(na == a);
}

TEST_CASE("noisy mixing follows the requested SNR and converges at +60 dB") {
  const auto bank = make_noise_bank(1, 8, 10.0);
  const Waveform clean = read_wav(corpus().entries[0].audio);
  EvalOptions opts;
  opts.noisy = true;
  opts.snr_db = 10.0;
  const Waveform mixed = noisy_version(clean, corpus().entries[0].audio, bank, opts);
  std::vector<double> noise(clean.samples.size());
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = mixed.samples[i] - clean.samples[i];
  CHECK(std::abs(power_ratio_db(clean.samples, noise) - 10.0) < 0.01);

  // Same id and seed: same draw. Another id: another draw.
  CHECK(noisy_version(clean, "/x/" + fs::path(corpus().entries[0].audio).filename().string(),
                      bank, opts)
            .samples == mixed.samples);
  CHECK(noisy_version(clean, "other.wav", bank, opts).samples != mixed.samples);

  Model model(tiny(), 3);
  EvalOptions c;
  EvalOptions n;
  n.noisy = true;
  n.snr_db = 60.0;
  const auto rc = evaluate(model, corpus().entries, default_keywords(), c);
  const auto rn = evaluate(model, corpus().entries, default_keywords(), n);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(rc.pooled_frr[j] - rn.pooled_frr[j]) <= 0.005);
}

TEST_CASE("missing audio is a data error naming the path") {
  auto entries = corpus().entries;
  entries[3].audio = "/nonexistent/dir/missing_utt.wav";
  Model model(tiny(), 1);
  try {
    evaluate(model, entries, default_keywords(), {});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/missing_utt.wav") != std::string::npos);
  }
}

TEST_CASE("DET export round trip") {
  const auto dir = scratch("det");
  Model model(tiny(), 2);
  const auto r = evaluate(model, corpus().entries, default_keywords(), {});
  const auto path = (dir / "det.csv").string();
  emit_det(r, path);
  const auto back = read_det(path);
  REQUIRE(back.size() == r.keywords.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].keyword == r.keywords[k].keyword);
    REQUIRE(back[k].points.size() == r.keywords[k].det.size());
    for (std::size_t i = 0; i < back[k].points.size(); ++i) {
      CHECK(back[k].points[i].first == r.keywords[k].det[i].fa_per_hour);
      CHECK(back[k].points[i].second == 100.0 * r.keywords[k].det[i].frr);
      if (i > 0) {
        CHECK(back[k].points[i].first > back[k].points[i - 1].first);
        CHECK(back[k].points[i].second <= back[k].points[i - 1].second);
      }
    }
  }

  // One-point curve: a single data row under the header.
  EvalReport one;
  one.keywords.push_back({"volume_up", 1, {}, {{0.0, 2.0, 0.25}}});
  emit_det(one, path);
  std::ifstream is(path);
  std::string l1, l2, l3, l4;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  CHECK(l1 == "# keyword: volume_up");
  CHECK(l2 == "fa_per_hour,frr_percent");
  CHECK(l3 == "2,25");
  CHECK_FALSE(std::getline(is, l4));

  std::ofstream(path) << "# keyword: a\nfa_per_hour,frr_percent\n1,x\n";
  CHECK_THROWS_AS(read_det(path), DataError);
  CHECK_THROWS_AS(read_det((dir / "none.csv").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("variant sweep") {
  std::vector<Example> train_set;
  {
    const auto& e = corpus().entries;
    train_set = load_examples(std::vector<ManifestEntry>(e.begin(), e.begin() + 20));
  }
  SweepSetup setup;
  setup.base = tiny();
  setup.train.epochs = 1;

  CHECK(variant_sweep({5000}, {}, train_set, corpus().entries, setup).empty());
  std::ostringstream empty;
  write_sweep_table({}, default_fa_targets(), empty);
  CHECK(empty.str() == "budget\tvariant\tw\tparams\tfrr@0.1\tfrr@0.2\tfrr@0.5\tfrr@1\n");

  const auto rows =
      variant_sweep({5000, 10}, {Variant::kMlp, Variant::kGkanPost}, train_set, corpus().entries, setup);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].variant == "MLP");
  CHECK(rows[1].variant == "GKAN_post");
  CHECK(rows[0].feasible);
  CHECK(rows[1].feasible);
  CHECK(rows[1].width < rows[0].width);
  CHECK(rows[0].param_count <= 5000);
  CHECK(rows[1].param_count <= 5000);
  CHECK(rows[0].frr.size() == 4);
  CHECK_FALSE(rows[2].feasible);
  CHECK_FALSE(rows[3].feasible);

  const auto again =
      variant_sweep({5000, 10}, {Variant::kMlp, Variant::kGkanPost}, train_set, corpus().entries, setup);
  CHECK(again == rows);
  std::ostringstream table;
  write_sweep_table(rows, default_fa_targets(), table);
  CHECK(table.str().find("# skipped") != std::string::npos);
}
