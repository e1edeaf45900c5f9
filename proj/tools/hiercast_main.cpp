#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "hiercast/experiment.hpp"
#include "hiercast/io.hpp"
#include "hiercast/rng.hpp"

namespace fs = std::filesystem;
using namespace hiercast;

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  double lambda = 0.0;
  bool lambda_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path,
                              "experiment config file (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "override the master seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out, "output file or directory");
  cmd->add_option("--lambda", args.lambda,
                  "override the coherence penalty weight")
      ->each([&args](const std::string&) { args.lambda_set = true; });
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.lambda_set) cfg.train.lambda = args.lambda;
  return cfg;
}

SeriesPanel history_slice(const ExperimentConfig& cfg,
                          const SeriesPanel& panel) {
  return panel.slice(0, cfg.split.history_end);
}

int run_synth(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  if (!cfg.synthetic)
    throw ExperimentError("synth: config has no 'synthetic' section");
  if (args.out.empty()) throw ExperimentError("synth: --out is required");
  const HierarchySpec hierarchy = HierarchySpec::from_file(cfg.hierarchy_file);
  const SeriesPanel panel = load_panel(cfg, hierarchy);
  write_csv(panel, args.out);
  std::cout << "wrote " << panel.node_count() << " series x " << panel.length()
            << " steps to " << args.out << "\n";
  return 0;
}

int run_train(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const std::string out =
      args.out.empty() ? (fs::path(cfg.out_dir) / "model.json").string()
                       : args.out;
  if (out == "model.json" && cfg.out_dir.empty())
    throw ExperimentError("train: --out or config 'out' is required");
  const HierarchySpec hierarchy = HierarchySpec::from_file(cfg.hierarchy_file);
  const SeriesPanel panel = load_panel(cfg, hierarchy);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainedModel model = train(history_slice(cfg, panel), hierarchy, tc);
  fs::create_directories(fs::path(out).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out).parent_path());
  save_model(model, out);
  std::cout << "trained " << tc.epochs << " epochs, final loss "
            << format_double(model.loss_trace.back()) << ", model at " << out
            << "\n";
  return 0;
}

int run_forecast(const CommonArgs& args, const std::string& model_path) {
  const ExperimentConfig cfg = load_config(args);
  if (cfg.out_dir.empty())
    throw ExperimentError("forecast: --out or config 'out' is required");
  fs::create_directories(cfg.out_dir);
  const TrainedModel model = load_model(model_path);
  const HierarchySpec hierarchy = model.hierarchy();
  const SeriesPanel panel = load_panel(cfg, hierarchy);
  const ForecastResult fr =
      forecast(model, history_slice(cfg, panel), cfg.split.horizon,
               cfg.samples, cfg.seed);
  write_gaussian_forecast(fr.gaussian, hierarchy.nodes(),
                          (fs::path(cfg.out_dir) / "gaussian.csv").string());
  write_sample_forecast(fr.samples, hierarchy.nodes(),
                        (fs::path(cfg.out_dir) / "samples_raw.csv.gz").string());
  const SummingMatrix S = build_summing_matrix(hierarchy);
  const SampleForecast hardened = harden_bottom_up(fr.samples, S);
  write_sample_forecast(hardened, hierarchy.nodes(),
                        (fs::path(cfg.out_dir) / "samples.csv.gz").string());
  double residual = 0.0;
  for (int t = 0; t < fr.gaussian.horizon(); ++t)
    residual += coherency_residual(S, fr.gaussian.mu.col(t));
  residual /= std::max(1, fr.gaussian.horizon());
  std::cout << "forecast horizon " << cfg.split.horizon
            << ", mean pre-hardening residual " << format_double(residual)
            << ", artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int run_reconcile(const CommonArgs& args, const std::string& method,
                  const std::string& in_path) {
  const ExperimentConfig cfg = load_config(args);
  if (args.out.empty()) throw ExperimentError("reconcile: --out is required");
  const HierarchySpec hierarchy = HierarchySpec::from_file(cfg.hierarchy_file);
  const SummingMatrix S = build_summing_matrix(hierarchy);
  const SampleForecast samples = read_sample_forecast(in_path, hierarchy);

  ReconciliationMap map;
  if (method == "bu") {
    map = build_bu(S);
  } else if (method == "td") {
    const SeriesPanel panel = load_panel(cfg, hierarchy);
    map = build_td(S, history_slice(cfg, panel));
  } else if (method == "mint" || method == "mint-struct") {
    map = build_mint(S, CovarianceAssumption::Struct);
  } else if (method == "mint-ols") {
    map = build_mint(S, CovarianceAssumption::OlsIdentity);
  } else {
    throw ExperimentError("reconcile: unknown --method '" + method +
                          "' (expected bu, td, mint, mint-struct, mint-ols)");
  }

  const SampleForecast reconciled = reconcile_samples(map, S, samples);
  write_sample_forecast(reconciled, hierarchy.nodes(), args.out);
  double worst = 0.0;
  for (const auto& step : reconciled.steps)
    for (Eigen::Index k = 0; k < step.cols(); ++k)
      worst = std::max(worst, coherency_residual(S, step.col(k)));
  std::cout << "reconciled " << reconciled.horizon() << " steps x "
            << reconciled.sample_count << " samples with " << method
            << ", max residual " << format_double(worst) << "\n";
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& in_path,
                 const std::string& label) {
  const ExperimentConfig cfg = load_config(args);
  const HierarchySpec hierarchy = HierarchySpec::from_file(cfg.hierarchy_file);
  const SeriesPanel panel = load_panel(cfg, hierarchy);
  const SeriesPanel test =
      panel.slice(cfg.split.history_end, cfg.split.horizon);
  const SampleForecast samples = read_sample_forecast(in_path, hierarchy);
  const EvalReport report = evaluate(samples, test, hierarchy, label);
  const std::string csv = report_csv(report);
  if (!args.out.empty())
    write_text_file(args.out, csv);
  else
    std::cout << csv;
  std::cout << "overall mean crps " << format_double(report.overall_mean)
            << "\n";
  return 0;
}

int run_mcb(const CommonArgs& args, const std::string& in_path,
            double constant) {
  if (args.out.empty()) throw ExperimentError("mcb: --out is required");
  const CsvTable table = read_csv_table(in_path);
  if (table.header !=
      std::vector<std::string>{"node", "level", "method", "crps"})
    throw ExperimentError("mcb: '" + in_path +
                          "' must have columns node,level,method,crps");

  std::vector<std::string> methods, nodes;
  std::map<std::string, int> method_at, node_at;
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw ExperimentError("mcb: ragged row");
    if (!node_at.count(row[0])) {
      node_at[row[0]] = static_cast<int>(nodes.size());
      nodes.push_back(row[0]);
    }
    if (!method_at.count(row[2])) {
      method_at[row[2]] = static_cast<int>(methods.size());
      methods.push_back(row[2]);
    }
  }
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(methods.size()),
                         static_cast<Eigen::Index>(nodes.size()));
  Eigen::MatrixXd seen = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
  for (const auto& row : table.rows) {
    const int m = method_at[row[2]];
    const int i = node_at[row[0]];
    scores(m, i) = std::stod(row[3]);
    seen(m, i) += 1.0;
  }
  if ((seen.array() != 1.0).any())
    throw ExperimentError("mcb: every method needs exactly one score per node");

  McbOptions options;
  options.critical_constant = constant;
  const McbResult result = mcb(scores, methods, options);
  fs::create_directories(args.out);
  write_text_file((fs::path(args.out) / "mcb.csv").string(), mcb_csv(result));
  write_mcb_svg(result, (fs::path(args.out) / "mcb.svg").string());
  std::cout << mcb_csv(result);
  return 0;
}

int run_compare(const CommonArgs& args,
                const std::vector<std::string>& methods) {
  ExperimentConfig cfg = load_config(args);
  if (!methods.empty()) cfg.methods = methods;
  const ComparisonResult result = run_comparison(cfg);
  std::cout << "method,mean_crps\n";
  for (const auto& report : result.reports)
    std::cout << report.method << ',' << format_double(report.overall_mean)
              << '\n';
  std::cout << "artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int run_grid(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const HierarchySpec hierarchy = HierarchySpec::from_file(cfg.hierarchy_file);
  const SeriesPanel panel = load_panel(cfg, hierarchy);
  const GridResult result =
      grid_search(cfg, hierarchy, history_slice(cfg, panel), true);
  if (!result.table_csv.empty()) {
    std::cout << result.table_csv;
    if (!cfg.out_dir.empty()) {
      fs::create_directories(cfg.out_dir);
      write_text_file((fs::path(cfg.out_dir) / "grid.csv").string(),
                      result.table_csv);
    }
  }
  std::cout << "selected lambda=" << format_double(result.best.lambda)
            << " hidden=" << result.best.hidden
            << " layers=" << result.best.layers
            << " dropout=" << format_double(result.best.dropout)
            << " epochs=" << result.best.epochs << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hiercast: probabilistic hierarchical forecasting with "
               "coherence-regularized training"};
  app.require_subcommand(0, 1);
  bool show_reference = false;
  app.add_flag("--config-reference", show_reference,
               "print the annotated config key listing and exit");

  CommonArgs synth_args, train_args, forecast_args, reconcile_args,
      evaluate_args, mcb_args, compare_args, grid_args;
  std::string model_path, reconcile_method = "bu", reconcile_in, evaluate_in,
              evaluate_label = "eval", mcb_in;
  double mcb_constant = 0.0;
  std::vector<std::string> compare_methods;

  auto* synth = app.add_subcommand("synth", "generate a synthetic panel CSV");
  add_common(synth, synth_args, true);

  auto* train_cmd = app.add_subcommand("train", "train the deep model");
  add_common(train_cmd, train_args, true);

  auto* forecast_cmd =
      app.add_subcommand("forecast", "forecast from a trained model");
  add_common(forecast_cmd, forecast_args, true);
  forecast_cmd->add_option("--model", model_path, "trained model file")
      ->required();

  auto* reconcile_cmd =
      app.add_subcommand("reconcile", "reconcile a sample forecast file");
  add_common(reconcile_cmd, reconcile_args, true);
  reconcile_cmd->add_option("--method", reconcile_method,
                            "bu, td, mint, mint-struct, or mint-ols");
  reconcile_cmd->add_option("--in", reconcile_in, "sample forecast file")
      ->required();

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "score a sample forecast file");
  add_common(evaluate_cmd, evaluate_args, true);
  evaluate_cmd->add_option("--in", evaluate_in, "sample forecast file")
      ->required();
  evaluate_cmd->add_option("--method", evaluate_label,
                           "method label for the report rows");

  auto* mcb_cmd =
      app.add_subcommand("mcb", "multiple-comparison chart from a score file");
  mcb_cmd->add_option("--in", mcb_in, "scores file (node,level,method,crps)")
      ->required();
  mcb_cmd->add_option("--out", mcb_args.out, "output directory")->required();
  mcb_cmd->add_option("--constant", mcb_constant,
                      "studentized-range constant (0 = built-in table)");

  auto* compare_cmd =
      app.add_subcommand("compare", "run the full method comparison");
  add_common(compare_cmd, compare_args, true);
  compare_cmd->add_option("--method", compare_methods,
                          "method label (repeatable; overrides the config)");

  auto* grid_cmd =
      app.add_subcommand("grid", "hyperparameter search for deepar-hier");
  add_common(grid_cmd, grid_args, true);

  CLI11_PARSE(app, argc, argv);

  if (show_reference) {
    std::cout << config_reference();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (forecast_cmd->parsed()) return run_forecast(forecast_args, model_path);
    if (reconcile_cmd->parsed())
      return run_reconcile(reconcile_args, reconcile_method, reconcile_in);
    if (evaluate_cmd->parsed())
      return run_evaluate(evaluate_args, evaluate_in, evaluate_label);
    if (mcb_cmd->parsed()) return run_mcb(mcb_args, mcb_in, mcb_constant);
    if (compare_cmd->parsed())
      return run_compare(compare_args, compare_methods);
    if (grid_cmd->parsed()) return run_grid(grid_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
