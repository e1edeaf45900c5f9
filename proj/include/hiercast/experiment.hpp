#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiercast/arrange.hpp"
#include "hiercast/baselines.hpp"
#include "hiercast/forecast_types.hpp"
#include "hiercast/hierarchy.hpp"
#include "hiercast/metrics.hpp"
#include "hiercast/model.hpp"
#include "hiercast/panel.hpp"
#include "hiercast/reconcile.hpp"

namespace hiercast {

struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One comparison entry. Classical methods are written
// "<base>-<arrangement>-<reconciler>[-<covariance>]", e.g. "ar-stack-bu",
// "ses-rank-mint", "ar-stack-mint-ols", "ses-stack-none" (no
// reconciliation). The two deep labels are "deepar-hier" and "pure-deepar".
struct MethodSpec {
  std::string label;
  bool deep = false;
  bool regularized = false;  // deepar-hier; pure-deepar pins lambda = 0
  ForecasterKind base = ForecasterKind::Ar;
  Arrangement arrangement = Arrangement::Stack;
  bool reconciled = false;
  ReconcileMethod reconciler = ReconcileMethod::Bu;
  CovarianceAssumption covariance = CovarianceAssumption::None;

  static MethodSpec parse(const std::string& text);
};

// The paper-style default grid: {ar, ses} x {stack, rank, random} x
// {bu, mint} plus the two deep methods.
std::vector<std::string> default_methods();

struct ExperimentConfig {
  std::string hierarchy_file;
  std::string data_file;  // empty with synthetic.enabled -> generated panel
  IngestMode ingest_mode = IngestMode::BottomOnly;

  bool synthetic = false;
  int synthetic_length = 200;
  SyntheticParams synthetic_params;

  SplitConfig split;
  std::vector<std::string> methods = default_methods();
  int samples = 500;
  std::uint64_t seed = 1;
  int ar_order = 4;
  std::string out_dir;

  TrainConfig train;                   // deep-method base configuration
  std::vector<double> grid_lambdas;    // lambda candidates for deepar-hier
  std::vector<int> grid_hidden;        // optional further axes
  std::vector<int> grid_layers;
  std::vector<double> grid_dropout;
  std::vector<int> grid_epochs;

  McbOptions mcb;

  void validate() const;
};

// JSON config file; unknown keys are rejected.
ExperimentConfig load_experiment_config(const std::string& path);

// Annotated listing of every config key and its default.
std::string config_reference();

// The panel the experiment runs on: ingested from data_file or generated
// synthetically. Length covers history plus the test horizon.
SeriesPanel load_panel(const ExperimentConfig& config,
                       const HierarchySpec& hierarchy);

// Fits one base forecaster per node on the history rows and stacks the
// per-node Gaussian forecasts.
GaussianForecast base_forecasts(const SeriesPanel& history, ForecasterKind kind,
                                int order, int horizon,
                                std::vector<std::string>* notes = nullptr);

// Runs one method end to end and persists its artifacts under
// <out_dir>/<label>/. Deterministic per config seed.
EvalReport run_method(const ExperimentConfig& config,
                      const HierarchySpec& hierarchy,
                      const SeriesPanel& panel, const std::string& method);

struct GridResult {
  TrainConfig best;
  // one row per candidate x fold plus the candidate means, as written to
  // grid.csv
  std::string table_csv;
};

// Rolling-origin cross-validation over the configured axes; picks the
// candidate with the smallest mean validation CRPS, ties broken by smaller
// lambda, then smaller hidden width.
GridResult grid_search(const ExperimentConfig& config,
                       const HierarchySpec& hierarchy,
                       const SeriesPanel& history, bool regularized);

struct ComparisonResult {
  std::vector<EvalReport> reports;
  McbResult mcb;
};

// Runs every configured method and writes the summary tables, per-node
// scores, and the MCB chart under out_dir.
ComparisonResult run_comparison(const ExperimentConfig& config);

// Sample and Gaussian forecast files: one row per (step, node), samples or
// (mu, sigma) in the remaining columns.
void write_sample_forecast(const SampleForecast& samples,
                           const std::vector<std::string>& node_ids,
                           const std::string& path);
SampleForecast read_sample_forecast(const std::string& path,
                                    const HierarchySpec& hierarchy);
void write_gaussian_forecast(const GaussianForecast& forecast,
                             const std::vector<std::string>& node_ids,
                             const std::string& path);
GaussianForecast read_gaussian_forecast(const std::string& path,
                                        const HierarchySpec& hierarchy);

// report.csv rows: node,level,method,crps.
std::string report_csv(const EvalReport& report);

}  // namespace hiercast
