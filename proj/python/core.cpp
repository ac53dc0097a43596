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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "kanspot/decoder.hpp"
#include "kanspot/encoder.hpp"
#include "kanspot/error.hpp"
#include "kanspot/evaluator.hpp"
#include "kanspot/frontend.hpp"
#include "kanspot/gram.hpp"
#include "kanspot/keywords.hpp"
#include "kanspot/parallel.hpp"
#include "kanspot/trainer.hpp"

namespace py = pybind11;
using namespace kanspot;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

Waveform to_waveform(const Array& samples, int rate) {
  if (samples.ndim() != 1) throw DimensionError("audio must be one-dimensional");
  return Waveform{to_vector(samples), rate};
}

Array features_array(const FeatureMatrix& f) {
  return to_array(f.data, {py::ssize_t(f.n_mels), py::ssize_t(f.n_frames)});
}

// [T x 13] posteriors as a flat vector after a shape check.
std::vector<double> posterior_frames(const Array& p) {
  if (p.ndim() != 2 || p.shape(1) != kNumClasses)
    throw DimensionError("posteriors must be [T x 13]");
  return to_vector(p);
}

const KeywordSpec& keyword_by_name(const std::string& name) {
  return find_keyword(default_keywords(), name);
}

py::list events_list(const std::vector<DetectionEvent>& events) {
  py::list out;
  for (const auto& e : events)
    out.append(py::dict(py::arg("keyword") = e.keyword, py::arg("frame") = e.frame_index,
                        py::arg("score") = e.score));
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::list kws;
  for (const auto& k : r.keywords) {
    py::list points;
    for (const auto& p : k.points)
      points.append(py::dict(py::arg("target_fa_per_hour") = p.target_fa_per_hour,
                             py::arg("threshold") = p.threshold,
                             py::arg("fa_per_hour") = p.fa_per_hour, py::arg("frr") = p.frr));
    py::list det;
    for (const auto& d : k.det) det.append(py::make_tuple(d.fa_per_hour, d.frr));
    kws.append(py::dict(py::arg("keyword") = k.keyword, py::arg("n_positive") = k.n_positive,
                        py::arg("points") = points, py::arg("det") = det));
  }
  std::ostringstream text;
  write_report(r, text);
  py::dict d;
  d["variant"] = r.variant;
  d["width"] = r.width;
  d["param_count"] = r.param_count;
  d["condition"] = r.condition;
  d["snr_db"] = r.snr_db;
  d["seed"] = r.seed;
  d["n_negative"] = r.n_negative;
  d["negative_hours"] = r.negative_hours;
  d["targets"] = r.targets;
  d["keywords"] = kws;
  d["pooled_frr"] = r.pooled_frr;
  d["mean_frr"] = r.mean_frr;
  d["text"] = text.str();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GKAN keyword spotting toolkit";

  // errors
  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", error.ptr());
  py::register_exception<ContractError>(m, "ContractError", error.ptr());
  py::register_exception<LengthError>(m, "LengthError", error.ptr());
  py::register_exception<RateError>(m, "RateError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", error.ptr());

  m.attr("NUM_CLASSES") = kNumClasses;
  m.attr("SAMPLE_RATE") = kSampleRate;
  m.def("class_names", &class_names);
  m.def("keywords", [] {
    py::dict out;
    for (const auto& k : default_keywords()) out[py::str(k.name)] = k.subword_ids;
    return out;
  });
  m.def("resolve_workers", &resolve_workers, py::arg("requested") = 0);

  // basis
  m.def(
      "gram_eval",
      [](const Array& x, int degree) {
        std::vector<double> xs = to_vector(x);
        const std::size_t cols = std::size_t(degree) + 1;
        std::vector<double> values(xs.size() * cols), derivs(xs.size() * cols);
        gram_eval_batch(xs, degree, values, derivs);
        const std::vector<py::ssize_t> shape{py::ssize_t(xs.size()), py::ssize_t(cols)};
        return py::make_tuple(to_array(values, shape), to_array(derivs, shape));
      },
      py::arg("x"), py::arg("degree"),
      "Basis values and x-derivatives, each [len(x) x (degree+1)].");
  m.def(
      "phi",
      [](double x, double w_b, double w_s, const std::vector<double>& coeffs) {
        return phi_reference(x, w_b, w_s, coeffs);
      },
      py::arg("x"), py::arg("w_b"), py::arg("w_s"), py::arg("coeffs"));

  // models
  m.def("variants", [] {
    std::vector<std::string> names;
    for (Variant v : all_variants()) names.push_back(variant_name(v));
    return names;
  });

  py::class_<VariantConfig>(m, "VariantConfig")
      .def(py::init([](const std::string& variant, int w, int e, int K, int degree, int blocks,
                       bool gkan_base) {
             VariantConfig c;
             c.variant = parse_variant(variant);
             c.w = w;
             c.e = e;
             c.K = K;
             c.degree = degree;
             c.n_blocks = blocks;
             c.gkan_base = gkan_base;
             c.validate();
             return c;
           }),
           py::arg("variant") = "MLP", py::arg("w") = 72, py::arg("e") = 6, py::arg("K") = 5,
           py::arg("degree") = 3, py::arg("blocks") = 5, py::arg("gkan_base") = false)
      .def_property(
          "variant", [](const VariantConfig& c) { return variant_name(c.variant); },
          [](VariantConfig& c, const std::string& v) { c.variant = parse_variant(v); })
      .def_readwrite("w", &VariantConfig::w)
      .def_readwrite("e", &VariantConfig::e)
      .def_readwrite("K", &VariantConfig::K)
      .def_readwrite("degree", &VariantConfig::degree)
      .def_readwrite("blocks", &VariantConfig::n_blocks)
      .def_readwrite("gkan_base", &VariantConfig::gkan_base)
      .def_readonly("n_classes", &VariantConfig::n_classes)
      .def_readonly("n_features", &VariantConfig::n_features)
      .def("__eq__", [](const VariantConfig& a, const VariantConfig& b) { return a == b; })
      .def("__repr__", [](const VariantConfig& c) {
        std::ostringstream os;
        os << "VariantConfig(variant='" << variant_name(c.variant) << "', w=" << c.w
           << ", e=" << c.e << ", K=" << c.K << ", degree=" << c.degree
           << ", blocks=" << c.n_blocks << ", gkan_base=" << (c.gkan_base ? "True" : "False")
           << ")";
        return os.str();
      });

  m.def("param_count", &model_param_count, py::arg("config"));
  m.def("width_for_budget", &width_for_budget, py::arg("config"), py::arg("budget"));

  py::class_<Model>(m, "Model")
      .def(py::init<const VariantConfig&, std::uint64_t>(), py::arg("config"),
           py::arg("seed") = 1)
      .def_property_readonly("config", &Model::config)
      .def("param_count", &Model::param_count)
      .def(
          "forward",
          [](const Model& model, const Array& features) {
            if (features.ndim() != 2 && features.ndim() != 3)
              throw DimensionError("features must be [F x T] or [B x F x T]");
            const bool batched = features.ndim() == 3;
            Shape shape;
            if (!batched) shape.push_back(1);
            for (py::ssize_t i = 0; i < features.ndim(); ++i)
              shape.push_back(std::size_t(features.shape(i)));
            Tensor x = Tensor::from_data(shape, to_vector(features));
            Tensor y;
            {
              py::gil_scoped_release release;
              NoGradGuard guard;
              y = model.forward(x);
            }
            std::vector<py::ssize_t> out_shape;
            for (std::size_t i = batched ? 0 : 1; i < y.rank(); ++i)
              out_shape.push_back(py::ssize_t(y.dim(i)));
            return to_array(y.data(), out_shape);
          },
          py::arg("features"), "Logits [C x T] or [B x C x T].")
      .def("parameters",
           [](const Model& model) {
             py::dict out;
             for (const auto& p : model.parameters()) {
               std::vector<py::ssize_t> shape(p.tensor.shape().begin(), p.tensor.shape().end());
               out[py::str(p.name)] = to_array(p.tensor.data(), shape);
             }
             return out;
           })
      .def("layout",
           [](const Model& model) {
             py::list out;
             for (const auto& l : model.layout())
               out.append(py::dict(py::arg("name") = l.name, py::arg("role") = l.role,
                                   py::arg("family") = family_name(l.family),
                                   py::arg("in_channels") = l.in_channels,
                                   py::arg("out_channels") = l.out_channels,
                                   py::arg("kernel") = l.kernel));
             return out;
           })
      .def("save", [](const Model& model, const std::string& path) {
        save_checkpoint(model, path);
      });
  m.def("load_model", &load_checkpoint, py::arg("path"));

  // frontend
  py::class_<FrontendConfig>(m, "FrontendConfig")
      .def(py::init<>())
      .def_readwrite("n_mels", &FrontendConfig::n_mels)
      .def_readwrite("window", &FrontendConfig::window)
      .def_readwrite("hop", &FrontendConfig::hop)
      .def_readwrite("n_fft", &FrontendConfig::n_fft)
      .def_readwrite("f_min", &FrontendConfig::f_min)
      .def_readwrite("f_max", &FrontendConfig::f_max)
      .def_readwrite("cmvn", &FrontendConfig::cmvn);

  m.def(
      "logmel",
      [](const Array& samples, int rate, const FrontendConfig& cfg) {
        return features_array(logmel(to_waveform(samples, rate), cfg));
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate,
      py::arg("config") = FrontendConfig{});
  m.def(
      "compute_features",
      [](const Array& samples, int rate, const FrontendConfig& cfg) {
        return features_array(compute_features(to_waveform(samples, rate), cfg));
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate,
      py::arg("config") = FrontendConfig{});
  m.def("frame_count", &frame_count, py::arg("n_samples"), py::arg("config") = FrontendConfig{});
  m.def("read_wav", [](const std::string& path) {
    Waveform w = read_wav(path);
    return py::make_tuple(to_array(w.samples, {py::ssize_t(w.samples.size())}), w.sample_rate);
  });
  m.def(
      "write_wav",
      [](const std::string& path, const Array& samples, int rate) {
        write_wav(to_waveform(samples, rate), path);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kSampleRate);
  m.def(
      "mix_at_snr",
      [](const Array& clean, const Array& noise, double snr_db) {
        Waveform w = mix_at_snr(to_waveform(clean, kSampleRate), to_waveform(noise, kSampleRate),
                                snr_db);
        return to_array(w.samples, {py::ssize_t(w.samples.size())});
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"));
  m.def(
      "power_ratio_db",
      [](const Array& a, const Array& b) { return power_ratio_db(to_vector(a), to_vector(b)); },
      py::arg("a"), py::arg("b"));

  // decoder
  py::class_<DecoderParams>(m, "DecoderParams")
      .def(py::init<>())
      .def_readwrite("min_duration", &DecoderParams::min_duration)
      .def_readwrite("floor", &DecoderParams::floor)
      .def_readwrite("window", &DecoderParams::window);

  m.def(
      "score_trace",
      [](const Array& posteriors, const std::string& keyword, const DecoderParams& params) {
        std::vector<double> s = score_trace(posterior_frames(posteriors),
                                            keyword_by_name(keyword), params);
        return to_array(s, {py::ssize_t(s.size())});
      },
      py::arg("posteriors"), py::arg("keyword"), py::arg("params") = DecoderParams{});
  m.def(
      "decode",
      [](const Array& posteriors, const DecoderParams& params) {
        return events_list(decode_utterance(posterior_frames(posteriors), default_keywords(),
                                            params));
      },
      py::arg("posteriors"), py::arg("params") = DecoderParams{});
  m.def(
      "sweep_threshold",
      [](const std::vector<double>& pos, const std::vector<double>& neg, double hours,
         const std::vector<double>& targets) {
        py::list out;
        for (const auto& p : sweep_threshold(pos, neg, hours, targets))
          out.append(py::dict(py::arg("target_fa_per_hour") = p.target_fa_per_hour,
                              py::arg("threshold") = p.threshold,
                              py::arg("fa_per_hour") = p.fa_per_hour, py::arg("frr") = p.frr));
        return out;
      },
      py::arg("pos_scores"), py::arg("neg_scores"), py::arg("neg_hours"),
      py::arg("targets") = default_fa_targets());

  // data, training, evaluation
  m.def(
      "synth",
      [](const std::string& out_dir, std::uint64_t seed, int positives, double negative_hours,
         int workers) {
        SynthSpec spec;
        spec.out_dir = out_dir;
        spec.seed = seed;
        spec.positives = positives;
        spec.negative_hours = negative_hours;
        spec.workers = resolve_workers(workers);
        py::gil_scoped_release release;
        return synth_dataset(spec).manifest_path;
      },
      py::arg("out_dir"), py::arg("seed") = 1, py::arg("positives") = 100,
      py::arg("negative_hours") = 0.05, py::arg("workers") = 0,
      "Writes a synthetic corpus and returns its manifest path.");

  m.def(
      "train",
      [](Model& model, const std::string& manifest, int epochs, double lr, int batch_size,
         std::uint64_t seed, const std::string& out_dir, const std::string& valid_manifest,
         int workers) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.out_dir = out_dir;
        cfg.validate();
        const int n = resolve_workers(workers);
        TrainResult result;
        {
          py::gil_scoped_release release;
          auto train_set = load_examples(read_manifest(manifest), {}, n);
          std::vector<Example> valid;
          if (!valid_manifest.empty()) valid = load_examples(read_manifest(valid_manifest), {}, n);
          result = train(model, train_set, cfg, valid);
        }
        py::list history;
        for (const auto& h : result.history)
          history.append(py::dict(py::arg("epoch") = h.epoch, py::arg("split") = h.split,
                                  py::arg("loss") = h.loss,
                                  py::arg("frame_accuracy") = h.frame_accuracy));
        return history;
      },
      py::arg("model"), py::arg("manifest"), py::arg("epochs") = 10, py::arg("lr") = 1e-3,
      py::arg("batch_size") = 16, py::arg("seed") = 1, py::arg("out_dir") = "",
      py::arg("valid_manifest") = "", py::arg("workers") = 0,
      "Trains in place and returns the per-epoch metrics.");

  m.def(
      "evaluate",
      [](const Model& model, const std::string& manifest, bool noisy, std::optional<double> snr,
         std::uint64_t seed, int workers) {
        EvalOptions opts;
        opts.noisy = noisy;
        opts.snr_db = snr;
        opts.seed = seed;
        opts.workers = resolve_workers(workers);
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(model, read_manifest(manifest), default_keywords(), opts);
        }
        return report_dict(r);
      },
      py::arg("model"), py::arg("manifest"), py::arg("noisy") = false,
      py::arg("snr_db") = py::none(), py::arg("seed") = 1, py::arg("workers") = 0,
      "FRR at the default FA/h targets, per keyword and pooled.");
}
