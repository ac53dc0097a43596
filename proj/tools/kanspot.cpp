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

// kanspot: synth | train | eval | det | sweep | paramcount
//
// --config FILE supplies key=value lines named after the subcommand's long
// flags (e.g. "epochs=3"). Flags on the command line win over the file.
// Failures print one line, "error: <kind>: <message>", and exit nonzero.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kanspot/error.hpp"
#include "kanspot/evaluator.hpp"
#include "kanspot/parallel.hpp"

namespace fs = std::filesystem;
using namespace kanspot;

namespace {

std::string variant_check(const std::string& s) {
  try {
    parse_variant(s);
    return {};
  } catch (const Error& e) {
    return e.what();
  }
}

struct ModelFlags {
  std::string variant = "MLP";
  int w = VariantConfig{}.w;
  int e = VariantConfig{}.e;
  int K = VariantConfig{}.K;
  int blocks = VariantConfig{}.n_blocks;
  int degree = VariantConfig{}.degree;
  bool gkan_base = false;
  std::size_t budget = 0;

  void add(CLI::App* app, bool with_variant = true, bool with_width = true) {
    if (with_variant) {
      app->add_option("--variant", variant, "Encoder variant (MLP, GKAN_MLP, MLP_GKAN, GKAN, "
                                            "GKAN_pre, GKAN_post, GKAN_mid, MLP_post)")
          ->check(variant_check);
    }
    if (with_width) {
      app->add_option("--w", w, "Channel width")->check(CLI::PositiveNumber);
      app->add_option("--budget", budget,
                      "Parameter budget; when > 0 the width is the largest that fits");
    }
    app->add_option("--e", e, "Expansion ratio")->check(CLI::PositiveNumber);
    app->add_option("--K", K, "Spatial kernel size")->check(CLI::PositiveNumber);
    app->add_option("--blocks", blocks, "Number of blocks")->check(CLI::PositiveNumber);
    app->add_option("--degree", degree, "Gram polynomial degree")->check(CLI::NonNegativeNumber);
    app->add_flag("--gkan-base", gkan_base, "Add the silu base term to GKAN layers");
  }

  VariantConfig config() const {
    VariantConfig c;
    c.variant = parse_variant(variant);
    c.w = w;
    c.e = e;
    c.K = K;
    c.n_blocks = blocks;
    c.degree = degree;
    c.gkan_base = gkan_base;
    if (budget > 0) c.w = width_for_budget(c, budget);
    c.validate();
    return c;
  }
};

struct TrainFlags {
  TrainConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--batch-size", cfg.batch_size, "Utterances per optimizer step")
        ->check(CLI::PositiveNumber);
    app->add_option("--lr", cfg.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    app->add_option("--beta1", cfg.beta1, "Adam beta1")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--beta2", cfg.beta2, "Adam beta2")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--eps", cfg.eps, "Adam epsilon")->check(CLI::PositiveNumber);
  }
};

struct EvalFlags {
  EvalOptions opts;
  double snr = 0.0;
  void add(CLI::App* app) {
    app->add_flag("--noisy", opts.noisy, "Mix background noise into every utterance");
    app->add_option("--snr", snr, "Fixed SNR in dB for --noisy (drawn per utterance when unset)")
        ->default_str("drawn");
    app->add_option("--noise-count", opts.noise_count, "Noise bank size")
        ->check(CLI::PositiveNumber);
    app->add_option("--floor", opts.decoder.floor, "Decoder score floor for emitting events")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--window", opts.decoder.window, "Decoder emission window in frames")
        ->check(CLI::PositiveNumber);
    app->add_option("--min-duration", opts.decoder.min_duration, "Minimum frames per subword")
        ->check(CLI::PositiveNumber);
  }
  EvalOptions resolve(CLI::App* app, std::uint64_t seed, int workers) {
    EvalOptions o = opts;
    if (app->count("--snr")) o.snr_db = snr;
    o.seed = seed;
    o.workers = workers;
    return o;
  }
};

// Unqualified keys belong to the subcommand being run.
class SubcommandConfig : public CLI::ConfigBase {
 public:
  explicit SubcommandConfig(std::string sub) : sub_(std::move(sub)) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() && !sub_.empty()) item.parents = {sub_};
    }
    return items;
  }

 private:
  std::string sub_;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword spotting with Gram-polynomial KAN convolutions"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "kanspot 0.1.0");
  app.set_config("--config", "",
                 "key=value file of flag defaults (long flag names without dashes)");
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  {
    std::string sub;
    for (int i = 1; i < argc && sub.empty(); ++i) {
      const std::string a = argv[i];
      for (const char* name : {"synth", "train", "eval", "det", "sweep", "paramcount"}) {
        if (a == name) sub = a;
      }
    }
    app.config_formatter(std::make_shared<SubcommandConfig>(sub));
  }

  std::uint64_t seed = 1;
  int workers = 0;
  auto common = [&](CLI::App* sub) {
    sub->footer("Also accepts --config FILE with key=value defaults for the flags above.");
    sub->add_option("--seed", seed, "Seed for every random draw");
    sub->add_option("--workers", workers,
                    "Worker threads for data work (0: KANSPOT_WORKERS, else all cores)")
        ->check(CLI::NonNegativeNumber);
  };

  // synth
  SynthSpec synth;
  auto* s_synth = app.add_subcommand("synth", "Write the synthetic keyword corpus");
  common(s_synth);
  s_synth->add_option("--out", synth.out_dir, "Output directory")->required();
  s_synth->add_option("--positives", synth.positives, "Keyword utterances (round robin)")
      ->check(CLI::NonNegativeNumber);
  s_synth->add_option("--negative-hours", synth.negative_hours, "Hours of negative audio")
      ->check(CLI::NonNegativeNumber);
  s_synth->add_option("--clip-seconds", synth.negative_clip_seconds, "Negative clip length")
      ->check(CLI::PositiveNumber);

  // train
  ModelFlags train_model;
  TrainFlags train_flags;
  std::string train_manifest, valid_manifest, train_out;
  auto* s_train = app.add_subcommand("train", "Train an encoder variant");
  common(s_train);
  s_train->add_option("--manifest", train_manifest, "Training manifest")->required();
  s_train->add_option("--valid-manifest", valid_manifest, "Optional validation manifest");
  s_train->add_option("--out", train_out,
                      "Run directory for model.kspt, metrics.jsonl and epoch checkpoints")
      ->required();
  train_model.add(s_train);
  train_flags.add(s_train);

  // eval and det
  std::string eval_model, eval_manifest, eval_out, eval_det;
  EvalFlags eval_flags;
  auto* s_eval = app.add_subcommand("eval", "Score a checkpoint: FRR at fixed FA/h");
  common(s_eval);
  s_eval->add_option("--model", eval_model, "Checkpoint")->required();
  s_eval->add_option("--manifest", eval_manifest, "Evaluation manifest")->required();
  s_eval->add_option("--out", eval_out, "Report file (stdout when empty)");
  s_eval->add_option("--det", eval_det, "Also write DET CSV here");
  eval_flags.add(s_eval);

  std::string det_model, det_manifest, det_out;
  EvalFlags det_flags;
  auto* s_det = app.add_subcommand("det", "Write DET curves as CSV");
  common(s_det);
  s_det->add_option("--model", det_model, "Checkpoint")->required();
  s_det->add_option("--manifest", det_manifest, "Evaluation manifest")->required();
  s_det->add_option("--out", det_out, "CSV path")->required();
  det_flags.add(s_det);

  // sweep
  ModelFlags sweep_model;
  TrainFlags sweep_train;
  EvalFlags sweep_eval;
  std::string sweep_train_manifest, sweep_eval_manifest, sweep_out;
  std::string sweep_budgets = "400000", sweep_variants = "MLP,GKAN_post";
  auto* s_sweep = app.add_subcommand("sweep", "Train and score variants at matched budgets");
  common(s_sweep);
  s_sweep->add_option("--train-manifest", sweep_train_manifest, "Training manifest")->required();
  s_sweep->add_option("--eval-manifest", sweep_eval_manifest, "Evaluation manifest")->required();
  s_sweep->add_option("--budget", sweep_budgets, "Comma-separated parameter budgets");
  s_sweep->add_option("--variants", sweep_variants, "Comma-separated variants")
      ->check([](const std::string& s) {
        for (const auto& v : split_list(s)) {
          if (auto m = variant_check(v); !m.empty()) return m;
        }
        return std::string();
      });
  s_sweep->add_option("--out", sweep_out, "Table file (stdout when empty)");
  sweep_model.add(s_sweep, false, false);
  sweep_train.add(s_sweep);
  sweep_eval.add(s_sweep);

  // paramcount
  ModelFlags pc_model;
  auto* s_pc = app.add_subcommand(
      "paramcount", "Print the parameter count, or with --budget the width table of all variants");
  s_pc->footer("Also accepts --config FILE with key=value defaults for the flags above.");
  pc_model.add(s_pc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    const int nworkers = resolve_workers(workers);
    if (*s_synth) {
      synth.seed = seed;
      synth.workers = nworkers;
      const auto r = synth_dataset(synth);
      std::cout << "manifest=" << r.manifest_path << "\npositives=" << r.n_positive
                << "\nnegatives=" << r.n_negative << '\n';
    } else if (*s_train) {
      const VariantConfig vc = train_model.config();
      const auto train_set = load_examples(read_manifest(train_manifest), {}, nworkers);
      std::vector<Example> valid;
      if (!valid_manifest.empty()) valid = load_examples(read_manifest(valid_manifest), {}, nworkers);
      Model model(vc, seed);
      TrainConfig tc = train_flags.cfg;
      tc.seed = seed;
      tc.out_dir = train_out;
      tc.verbose = true;
      train(model, train_set, tc, valid);
      fs::create_directories(train_out);
      const auto path = (fs::path(train_out) / "model.kspt").string();
      save_checkpoint(model, path);
      std::cout << "model=" << path << "\nvariant=" << variant_name(vc.variant)
                << "\nwidth=" << vc.w << "\nparam_count=" << model.param_count() << '\n';
    } else if (*s_eval || *s_det) {
      const bool is_eval = s_eval->parsed();
      const Model model = load_checkpoint(is_eval ? eval_model : det_model);
      const auto entries = read_manifest(is_eval ? eval_manifest : det_manifest);
      EvalFlags& f = is_eval ? eval_flags : det_flags;
      const auto report = evaluate(model, entries, default_keywords(),
                                   f.resolve(is_eval ? s_eval : s_det, seed, nworkers));
      if (is_eval) {
        if (eval_out.empty()) {
          write_report(report, std::cout);
        } else {
          write_report(report, eval_out);
        }
        if (!eval_det.empty()) emit_det(report, eval_det);
      } else {
        emit_det(report, det_out);
      }
    } else if (*s_sweep) {
      std::vector<std::size_t> budgets;
      for (const auto& b : split_list(sweep_budgets)) {
        std::size_t used = 0;
        long long v = -1;
        try {
          v = std::stoll(b, &used);
        } catch (const std::exception&) {
        }
        if (used != b.size() || v <= 0) {
          std::cerr << "error: usage: --budget: invalid budget '" << b << "'\n";
          return 2;
        }
        budgets.push_back(static_cast<std::size_t>(v));
      }
      std::vector<Variant> variants;
      for (const auto& v : split_list(sweep_variants)) variants.push_back(parse_variant(v));
      SweepSetup setup;
      setup.base = sweep_model.config();
      setup.model_seed = seed;
      setup.train = sweep_train.cfg;
      setup.train.seed = seed;
      setup.eval = sweep_eval.resolve(s_sweep, seed, nworkers);
      const auto train_set = load_examples(read_manifest(sweep_train_manifest), {}, nworkers);
      const auto rows =
          variant_sweep(budgets, variants, train_set, read_manifest(sweep_eval_manifest), setup);
      if (sweep_out.empty()) {
        write_sweep_table(rows, setup.eval.targets, std::cout);
      } else {
        auto os = open_out(sweep_out);
        write_sweep_table(rows, setup.eval.targets, os);
        if (!os) throw IoError("failed writing " + sweep_out);
      }
    } else if (*s_pc) {
      if (pc_model.budget == 0) {
        std::cout << model_param_count(pc_model.config()) << '\n';
      } else {
        std::cout << "variant\tw\tparams\n";
        ModelFlags f = pc_model;
        for (Variant v : all_variants()) {
          f.variant = variant_name(v);
          try {
            const VariantConfig c = f.config();
            std::cout << f.variant << '\t' << c.w << '\t' << model_param_count(c) << '\n';
          } catch (const InfeasibleError&) {
            std::cout << f.variant << "\t-\t-\n";
          }
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
