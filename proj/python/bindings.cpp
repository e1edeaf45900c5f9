#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hiercast/experiment.hpp"

namespace py = pybind11;
using namespace hiercast;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical probabilistic forecasting core";

  py::register_exception<StructuralError>(m, "StructuralError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<FitError>(m, "FitError");
  py::register_exception<ArrangeError>(m, "ArrangeError");
  py::register_exception<ReconcileError>(m, "ReconcileError");
  py::register_exception<ModelError>(m, "ModelError");
  py::register_exception<MetricsError>(m, "MetricsError");
  py::register_exception<ExperimentError>(m, "ExperimentError");

  // hierarchy
  py::class_<HierarchySpec>(m, "Hierarchy")
      .def_static("from_edges", &HierarchySpec::from_edges, py::arg("edges"))
      .def_static("from_file", &HierarchySpec::from_file, py::arg("path"))
      .def_property_readonly("nodes", &HierarchySpec::nodes)
      .def_property_readonly("node_count", &HierarchySpec::node_count)
      .def_property_readonly("bottom_count", &HierarchySpec::bottom_count)
      .def("index_of", &HierarchySpec::index_of, py::arg("node"))
      .def("node_id", &HierarchySpec::node_id, py::arg("index"))
      .def("parent_of", &HierarchySpec::parent_of, py::arg("index"))
      .def("children_of", &HierarchySpec::children_of, py::arg("index"))
      .def("level_of", &HierarchySpec::level_of, py::arg("index"))
      .def("is_bottom", &HierarchySpec::is_bottom, py::arg("index"))
      .def_property_readonly("level_count", &HierarchySpec::level_count)
      .def_property_readonly("bottom_indices", &HierarchySpec::bottom_indices)
      .def("save", &HierarchySpec::save, py::arg("path"))
      .def("to_edge_list", &HierarchySpec::to_edge_list);

  py::class_<SummingMatrix>(m, "SummingMatrix")
      .def_readonly("entries", &SummingMatrix::entries)
      .def_readonly("n", &SummingMatrix::n)
      .def_readonly("m", &SummingMatrix::m)
      .def_readonly("bottom_rows", &SummingMatrix::bottom_rows);

  m.def("build_summing_matrix", &build_summing_matrix, py::arg("hierarchy"));
  m.def("aggregate_bottom", &aggregate_bottom, py::arg("summing"),
        py::arg("bottom"));
  m.def("coherency_residual", &coherency_residual, py::arg("summing"),
        py::arg("values"));

  // panel
  py::class_<SeriesPanel>(m, "Panel")
      .def(py::init<>())
      .def_readwrite("values", &SeriesPanel::values)
      .def_readwrite("timestamps", &SeriesPanel::timestamps)
      .def_readwrite("node_ids", &SeriesPanel::node_ids)
      .def_property_readonly("node_count", &SeriesPanel::node_count)
      .def_property_readonly("length", &SeriesPanel::length)
      .def("slice", &SeriesPanel::slice, py::arg("start"), py::arg("len"));

  m.def(
      "ingest_csv",
      [](const std::string& path, const HierarchySpec& spec,
         const std::string& mode) {
        IngestMode im;
        if (mode == "bottom") im = IngestMode::BottomOnly;
        else if (mode == "all") im = IngestMode::AllNodes;
        else throw DataError("unknown ingest mode '" + mode + "'");
        return ingest_csv(path, spec, im);
      },
      py::arg("path"), py::arg("hierarchy"), py::arg("mode") = "bottom");
  m.def("write_csv", &write_csv, py::arg("panel"), py::arg("path"));
  m.def(
      "generate_synthetic",
      [](const HierarchySpec& spec, int length, std::uint64_t seed,
         std::vector<std::vector<double>> ar, double noise_scale,
         int seasonal_period, double seasonal_amplitude,
         std::vector<double> level) {
        SyntheticParams params;
        params.ar = std::move(ar);
        params.noise_scale = noise_scale;
        params.seasonal_period = seasonal_period;
        params.seasonal_amplitude = seasonal_amplitude;
        params.level = std::move(level);
        return generate_synthetic(spec, length, seed, params);
      },
      py::arg("hierarchy"), py::arg("length"), py::arg("seed"),
      py::arg("ar") = std::vector<std::vector<double>>{{0.6}},
      py::arg("noise_scale") = 1.0, py::arg("seasonal_period") = 0,
      py::arg("seasonal_amplitude") = 0.0,
      py::arg("level") = std::vector<double>{10.0});

  // baselines
  py::class_<BaseForecaster>(m, "BaseForecaster")
      .def_property_readonly(
          "kind", [](const BaseForecaster& f) { return to_string(f.kind); })
      .def_readonly("coefficients", &BaseForecaster::coefficients)
      .def_readonly("intercept", &BaseForecaster::intercept)
      .def_readonly("alpha", &BaseForecaster::alpha)
      .def_readonly("beta", &BaseForecaster::beta)
      .def_readonly("residual_variance", &BaseForecaster::residual_variance)
      .def_readonly("note", &BaseForecaster::note);
  m.def(
      "fit_forecaster",
      [](const Eigen::VectorXd& series, const std::string& kind, int order) {
        return fit_forecaster(series, forecaster_kind_from_string(kind), order);
      },
      py::arg("series"), py::arg("kind"), py::arg("order") = 4);
  m.def("forecast_gaussian", &forecast_gaussian, py::arg("forecaster"),
        py::arg("horizon"));

  // forecast containers
  py::class_<GaussianForecast>(m, "GaussianForecast")
      .def(py::init<>())
      .def_readwrite("mu", &GaussianForecast::mu)
      .def_readwrite("sigma", &GaussianForecast::sigma)
      .def_property_readonly("horizon", &GaussianForecast::horizon)
      .def_property_readonly("node_count", &GaussianForecast::node_count);
  py::class_<SampleForecast>(m, "SampleForecast")
      .def(py::init<>())
      .def_readwrite("steps", &SampleForecast::steps)
      .def_readwrite("sample_count", &SampleForecast::sample_count)
      .def_property_readonly("horizon", &SampleForecast::horizon)
      .def_property_readonly("node_count", &SampleForecast::node_count);

  // arrangements
  m.def(
      "arrange_forecast",
      [](const GaussianForecast& forecast, const std::string& arrangement,
         int n_samples, std::uint64_t seed) {
        return arrange_forecast(forecast, arrangement_from_string(arrangement),
                                n_samples, seed);
      },
      py::arg("forecast"), py::arg("arrangement"), py::arg("n_samples"),
      py::arg("seed"));

  // reconciliation
  py::class_<ReconciliationMap>(m, "ReconciliationMap")
      .def_readonly("P", &ReconciliationMap::P)
      .def_property_readonly(
          "method",
          [](const ReconciliationMap& r) { return to_string(r.method); })
      .def_property_readonly("covariance", [](const ReconciliationMap& r) {
        return to_string(r.covariance);
      });
  m.def("build_bu", &build_bu, py::arg("summing"));
  m.def("build_td", &build_td, py::arg("summing"), py::arg("history"));
  m.def(
      "build_mint",
      [](const SummingMatrix& S, const std::string& covariance) {
        return build_mint(S, covariance_from_string(covariance));
      },
      py::arg("summing"), py::arg("covariance") = "struct");
  m.def("reconcile_point", &reconcile_point, py::arg("map"), py::arg("summing"),
        py::arg("values"));
  m.def("reconcile_samples", &reconcile_samples, py::arg("map"),
        py::arg("summing"), py::arg("samples"));

  // metrics
  m.def("crps_empirical", &crps_empirical, py::arg("samples"), py::arg("y"));
  m.def("crps_gaussian", &crps_gaussian, py::arg("mu"), py::arg("sigma"),
        py::arg("y"));
  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("method", &EvalReport::method)
      .def_readonly("node_ids", &EvalReport::node_ids)
      .def_readonly("levels", &EvalReport::levels)
      .def_readonly("crps", &EvalReport::crps)
      .def_readonly("node_means", &EvalReport::node_means)
      .def_readonly("level_means", &EvalReport::level_means)
      .def_readonly("overall_mean", &EvalReport::overall_mean);
  m.def("evaluate", &evaluate, py::arg("forecast"), py::arg("actuals"),
        py::arg("hierarchy"), py::arg("method") = "");
  py::class_<McbResult>(m, "McbResult")
      .def_readonly("methods", &McbResult::methods)
      .def_readonly("average_rank", &McbResult::average_rank)
      .def_readonly("half_width", &McbResult::half_width)
      .def_property_readonly("overlap", [](const McbResult& r) {
        return r.overlap.cast<int>().eval();
      });
  m.def(
      "mcb",
      [](const Eigen::MatrixXd& scores, const std::vector<std::string>& names,
         double critical_constant) {
        McbOptions options;
        options.critical_constant = critical_constant;
        return mcb(scores, names, options);
      },
      py::arg("scores"), py::arg("method_names"),
      py::arg("critical_constant") = 0.0);
  m.def("mcb_csv", &mcb_csv, py::arg("result"));
  m.def("write_mcb_svg", &write_mcb_svg, py::arg("result"), py::arg("path"));

  // deep model
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("layers", &TrainConfig::layers)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_multiplier", &TrainConfig::batch_multiplier)
      .def_readwrite("windows_per_epoch", &TrainConfig::windows_per_epoch)
      .def_readwrite("context", &TrainConfig::context)
      .def_readwrite("horizon", &TrainConfig::horizon)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property(
          "kl_mode",
          [](const TrainConfig& c) { return to_string(c.kl_mode); },
          [](TrainConfig& c, const std::string& mode) {
            c.kl_mode = kl_mode_from_string(mode);
          })
      .def_readwrite("kl_samples", &TrainConfig::kl_samples)
      .def_readwrite("embedding_dim", &TrainConfig::embedding_dim)
      .def_readwrite("grad_clip", &TrainConfig::grad_clip)
      .def_readwrite("seasonal_period", &TrainConfig::seasonal_period);
  py::class_<TrainedModel>(m, "TrainedModel")
      .def_readonly("config", &TrainedModel::config)
      .def_readonly("node_ids", &TrainedModel::node_ids)
      .def_readonly("scale", &TrainedModel::scale)
      .def_readonly("loss_trace", &TrainedModel::loss_trace)
      .def("hierarchy", &TrainedModel::hierarchy);
  py::class_<ForecastResult>(m, "ForecastResult")
      .def_readonly("gaussian", &ForecastResult::gaussian)
      .def_readonly("samples", &ForecastResult::samples);
  m.def("train", &train, py::arg("panel"), py::arg("hierarchy"),
        py::arg("config"));
  m.def("forecast", &forecast, py::arg("model"), py::arg("panel"),
        py::arg("horizon"), py::arg("n_samples"), py::arg("seed"));
  m.def("harden_bottom_up", &harden_bottom_up, py::arg("samples"),
        py::arg("summing"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  // experiment driver
  m.def("load_experiment_config", &load_experiment_config, py::arg("path"));
  m.def("config_reference", &config_reference);
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("samples", &ExperimentConfig::samples)
      .def_readwrite("methods", &ExperimentConfig::methods)
      .def_readwrite("out_dir", &ExperimentConfig::out_dir);
  py::class_<ComparisonResult>(m, "ComparisonResult")
      .def_readonly("reports", &ComparisonResult::reports)
      .def_readonly("mcb", &ComparisonResult::mcb);
  m.def("run_comparison", &run_comparison, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
}
