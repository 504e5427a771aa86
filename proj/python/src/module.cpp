#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tempalign/align.hpp"
#include "tempalign/config.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/pca.hpp"
#include "tempalign/pipeline.hpp"
#include "tempalign/preproc.hpp"
#include "tempalign/ridge.hpp"
#include "tempalign/synth.hpp"
#include "tempalign/temporal.hpp"

namespace py = pybind11;
using namespace tempalign;

namespace {

using Cube = py::array_t<double, py::array::c_style | py::array::forcecast>;

AlphaGrid grid_of(const std::optional<std::vector<double>>& alphas) { return alphas ? AlphaGrid(*alphas) : AlphaGrid(); }

EpochTensor epochs_of(const Cube& data, std::vector<double> times, double sample_rate) {
  if (data.ndim() != 3) throw ShapeError("epochs must be a (words, sensors, times) array");
  const auto w = static_cast<std::size_t>(data.shape(0)), s = static_cast<std::size_t>(data.shape(1));
  if (static_cast<std::size_t>(data.shape(2)) != times.size()) throw ShapeError("epochs: times length differs from axis 2");
  return EpochTensor(w, s, std::move(times), sample_rate, std::vector<double>(data.data(), data.data() + data.size()));
}

Cube cube_of(const EpochTensor& e) {
  Cube out({e.n_words(), e.n_sensors(), e.n_times()});
  std::copy(e.data().begin(), e.data().end(), out.mutable_data());
  return out;
}

py::dict stat_dict(const CorrelationStat& s) {
  py::dict d;
  d["r"] = s.r;
  d["p"] = s.p_value;
  d["n"] = s.n;
  d["slope"] = s.slope;
  d["intercept"] = s.intercept;
  d["perfect_fit"] = s.perfect_fit;
  return d;
}

py::dict curve_dict(const AlignmentCurve& c) {
  py::dict d;
  d["depth"] = c.layer_depth;
  d["times"] = c.times;
  d["scores"] = c.scores;
  d["fold_scores"] = c.fold_scores;
  d["skipped_dims"] = c.skipped_dims;
  return d;
}

TmaxOptions tmax_options(double threshold, const std::string& mode, std::optional<std::pair<double, double>> window) {
  TmaxOptions o;
  o.threshold = threshold;
  o.mode = parse_tmax_mode(mode);
  o.window = window;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-resolved alignment of model layers with evoked sensor responses";
  m.attr("__version__") = version_string();

  // Translators run newest first, so the subclass is registered last.
  const auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  py::class_<RidgeModel>(m, "RidgeModel")
      .def_readonly("weights", &RidgeModel::weights)
      .def_readonly("intercepts", &RidgeModel::intercepts)
      .def_readonly("chosen_alpha", &RidgeModel::chosen_alpha)
      .def("predict", [](const RidgeModel& self, const Eigen::MatrixXd& x) { return predict(self, x); });

  m.def("default_alphas", [] { return AlphaGrid().values(); });
  m.def(
      "fit_ridge",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::optional<std::vector<double>> alphas) {
        return fit_ridge(x, y, grid_of(alphas));
      },
      py::arg("x"), py::arg("y"), py::arg("alphas") = py::none(),
      "Ridge with a per-target alpha chosen by closed-form leave-one-out error.");
  m.def(
      "loo_errors",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::optional<std::vector<double>> alphas) {
        return loo_errors(x, y, grid_of(alphas));
      },
      py::arg("x"), py::arg("y"), py::arg("alphas") = py::none(), "targets x alphas leave-one-out mean squared errors.");

  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("explained_variance", &PcaModel::explained_variance)
      .def("transform", [](const PcaModel& self, const Eigen::MatrixXd& x) { return transform(self, x); })
      .def("inverse_transform", [](const PcaModel& self, const Eigen::MatrixXd& z) { return inverse_transform(self, z); });
  m.def("fit_pca", &fit_pca, py::arg("x"), py::arg("n_components") = 50);

  m.def(
      "design_bandpass",
      [](double low, double high, double sample_rate) { return design_bandpass(low, high, sample_rate).taps; },
      py::arg("low"), py::arg("high"), py::arg("sample_rate"), "Taps of the single-pass band-pass kernel.");
  m.def(
      "bandpass",
      [](const RowMatrix& data, double sample_rate, double low, double high, unsigned threads) {
        return bandpass({data, sample_rate}, low, high, threads).data;
      },
      py::arg("data"), py::arg("sample_rate"), py::arg("low") = 0.1, py::arg("high") = 20.0, py::arg("threads") = 1,
      "Zero-phase band-pass of a (sensors, samples) array.");
  m.def(
      "resample",
      [](const RowMatrix& data, double sample_rate, double target_rate, unsigned threads) {
        return resample({data, sample_rate}, target_rate, threads).data;
      },
      py::arg("data"), py::arg("sample_rate"), py::arg("target_rate") = 30.0, py::arg("threads") = 1);

  m.def(
      "make_folds",
      [](std::size_t n_words, int n_folds, const std::string& mode, std::uint64_t seed) {
        return make_folds(n_words, n_folds, parse_fold_mode(mode), seed).assignments;
      },
      py::arg("n_words"), py::arg("n_folds") = 5, py::arg("mode") = "contiguous", py::arg("seed") = 0,
      "Fold index of every word.");
  m.def(
      "alignment_curves",
      [](const Cube& epochs, std::vector<double> times, double sample_rate,
         const std::vector<std::pair<double, Eigen::MatrixXd>>& layers, int folds,
         std::optional<std::vector<double>> alphas, const std::string& weighting, unsigned threads) {
        std::vector<LayerActivations> ls;
        for (const auto& [d, v] : layers) ls.push_back({d, v});
        const auto e = epochs_of(epochs, std::move(times), sample_rate);
        AlignOptions opts;
        opts.weighting = parse_dim_weighting(weighting);
        opts.threads = threads;
        std::vector<AlignmentCurve> curves;
        {
          py::gil_scoped_release release;
          curves = alignment_curves(e, ActivationSet(std::move(ls)), make_folds(e.n_words(), folds), grid_of(alphas), opts);
        }
        py::list out;
        for (const auto& c : curves) out.append(curve_dict(c));
        return out;
      },
      py::arg("epochs"), py::arg("times"), py::arg("sample_rate"), py::arg("layers"), py::arg("folds") = 5,
      py::arg("alphas") = py::none(), py::arg("weighting") = "uniform", py::arg("threads") = 1,
      "Cross-validated alignment curve of each (depth, words x dims) layer.");

  m.def(
      "pearson_p", [](double r, std::size_t n) { return pearson_p(r, n).value; }, py::arg("r"), py::arg("n"),
      "Two-sided p-value of a Pearson r over n pairs.");
  m.def(
      "t_max",
      [](const std::vector<double>& times, const std::vector<double>& scores, double threshold, const std::string& mode,
         std::optional<std::pair<double, double>> window) {
        return t_max(times, scores, tmax_options(threshold, mode, window));
      },
      py::arg("times"), py::arg("scores"), py::arg("threshold") = 0.95, py::arg("mode") = "union",
      py::arg("window") = py::none());
  m.def(
      "temporal_score",
      [](const std::map<double, double>& tmax_by_depth) {
        const auto res = temporal_score(tmax_by_depth);
        return stat_dict(res.stat);
      },
      py::arg("tmax_by_depth"), "Pearson of (depth, T_max) across layers.");

  m.def(
      "synth",
      [](std::optional<std::string> spec_json, std::optional<std::uint64_t> seed, unsigned threads) {
        auto spec = spec_json ? parse_synth_spec(*spec_json) : default_synth_spec();
        if (seed) spec.seed = *seed;
        const auto data = generate(spec, threads);
        py::dict d;
        d["epochs"] = cube_of(data.epochs);
        d["times"] = data.epochs.times();
        d["sample_rate"] = data.epochs.sample_rate();
        py::list layers;
        for (const auto& l : data.activations.layers()) layers.append(py::make_tuple(l.depth, l.values));
        d["layers"] = layers;
        d["latencies"] = spec.latencies;
        return d;
      },
      py::arg("spec_json") = py::none(), py::arg("seed") = py::none(), py::arg("threads") = 1,
      "Planted-latency fixture: raw epochs, (depth, activations) layers and the planted latencies.");
  m.def(
      "selftest",
      [](std::uint64_t seed, bool null, unsigned threads) {
        auto spec = default_synth_spec(seed);
        spec.null_activations = null;
        SelftestResult res;
        {
          py::gil_scoped_release release;
          res = run_selftest(spec, threads);
        }
        auto d = stat_dict(res.temporal.stat);
        d["tmax"] = res.temporal.per_layer_tmax;
        d["seconds"] = res.seconds;
        return d;
      },
      py::arg("seed") = 0, py::arg("null") = false, py::arg("threads") = 1);
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, bool force, std::optional<unsigned> threads) {
        auto cfg = read_run_config(config);
        if (threads) cfg.threads = *threads;
        RunOutcome out;
        {
          py::gil_scoped_release release;
          out = run_pipeline(cfg, force);
        }
        return py::module_::import("json").attr("loads")(out.manifest.dump());
      },
      py::arg("config"), py::arg("force") = false, py::arg("threads") = py::none(),
      "Runs a JSON run configuration and returns its run manifest.");
}
