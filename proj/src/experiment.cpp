#include "hiercast/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hiercast/io.hpp"
#include "hiercast/rng.hpp"

namespace fs = std::filesystem;

namespace hiercast {

namespace {

// Stream constants for deriving the independent sub-seeds of a run.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kArrangeStream = 2;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kForecastStream = 4;
constexpr std::uint64_t kFoldTrainStream = 10;
constexpr std::uint64_t kFoldForecastStream = 100;
// Deep methods share one seed base independent of the method label, so
// pure-deepar and deepar-hier at lambda 0 are the same run by construction.
constexpr std::uint64_t kDeepSalt = 0x6a90b1d44c2fb3e7ULL;

std::uint64_t sub_seed(std::uint64_t base, std::uint64_t stream) {
  return Rng(base).fork(stream).seed();
}

std::uint64_t deep_base(const ExperimentConfig& config) {
  return mix_seed(config.seed ^ kDeepSalt);
}

void expect_keys(const nlohmann::json& j,
                 const std::set<std::string>& allowed,
                 const std::string& where) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ExperimentError("config: unknown key '" + item.key() + "' in " +
                            where);
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ExperimentError(std::string("config: bad value for '") + key + "'");
  }
}

void write_file(const std::string& dir, const std::string& name,
                const std::string& content) {
  write_text_file((fs::path(dir) / name).string(), content);
}

}  // namespace

MethodSpec MethodSpec::parse(const std::string& text) {
  MethodSpec spec;
  spec.label = text;
  if (text == "deepar-hier") {
    spec.deep = true;
    spec.regularized = true;
    return spec;
  }
  if (text == "pure-deepar") {
    spec.deep = true;
    return spec;
  }

  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, '-')) parts.push_back(part);
  if (parts.size() < 3 || parts.size() > 4)
    throw ExperimentError(
        "method '" + text +
        "': expected <base>-<arrangement>-<reconciler>[-<covariance>]");
  try {
    spec.base = forecaster_kind_from_string(parts[0]);
    spec.arrangement = arrangement_from_string(parts[1]);
    if (parts[2] == "none") {
      spec.reconciled = false;
      if (parts.size() == 4)
        throw ExperimentError("method '" + text +
                              "': covariance given without a reconciler");
    } else {
      spec.reconciled = true;
      spec.reconciler = reconcile_method_from_string(parts[2]);
      if (spec.reconciler == ReconcileMethod::Mint)
        spec.covariance = parts.size() == 4
                              ? covariance_from_string(parts[3])
                              : CovarianceAssumption::Struct;
      else if (parts.size() == 4)
        throw ExperimentError("method '" + text +
                              "': covariance only applies to mint");
    }
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError("method '" + text + "': " + e.what());
  }
  return spec;
}

std::vector<std::string> default_methods() {
  std::vector<std::string> out;
  for (const char* base : {"ar", "ses"})
    for (const char* arr : {"stack", "rank", "random"})
      for (const char* rec : {"bu", "mint"})
        out.push_back(std::string(base) + "-" + arr + "-" + rec);
  out.emplace_back("deepar-hier");
  out.emplace_back("pure-deepar");
  return out;
}

void ExperimentConfig::validate() const {
  if (hierarchy_file.empty())
    throw ExperimentError("config: hierarchy file is required");
  if (data_file.empty() && !synthetic)
    throw ExperimentError("config: either a data file or synthetic "
                          "generation must be configured");
  if (methods.empty()) throw ExperimentError("config: empty method list");
  for (const auto& m : methods) MethodSpec::parse(m);
  if (samples < 2) throw ExperimentError("config: need at least 2 samples");
  if (ar_order < 1) throw ExperimentError("config: ar order must be >= 1");
  if (split.history_end < 1 || split.horizon < 1)
    throw ExperimentError("config: split needs history_end >= 1 and "
                          "horizon >= 1");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ExperimentError("config: cannot parse '" + path + "': " + e.what());
  }

  expect_keys(j,
              {"hierarchy", "data", "ingest_mode", "synthetic", "split",
               "methods", "samples", "seed", "ar_order", "out", "train",
               "grid", "mcb_constant"},
              "the top level");

  ExperimentConfig cfg;
  read_key(j, "hierarchy", cfg.hierarchy_file);
  read_key(j, "data", cfg.data_file);
  if (j.contains("ingest_mode")) {
    const auto mode = j.at("ingest_mode").get<std::string>();
    if (mode == "bottom")
      cfg.ingest_mode = IngestMode::BottomOnly;
    else if (mode == "all")
      cfg.ingest_mode = IngestMode::AllNodes;
    else
      throw ExperimentError("config: ingest_mode must be 'bottom' or 'all'");
  }

  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    expect_keys(s,
                {"length", "ar", "noise_scale", "seasonal_period",
                 "seasonal_amplitude", "level"},
                "'synthetic'");
    cfg.synthetic = true;
    read_key(s, "length", cfg.synthetic_length);
    read_key(s, "ar", cfg.synthetic_params.ar);
    read_key(s, "noise_scale", cfg.synthetic_params.noise_scale);
    read_key(s, "seasonal_period", cfg.synthetic_params.seasonal_period);
    read_key(s, "seasonal_amplitude", cfg.synthetic_params.seasonal_amplitude);
    read_key(s, "level", cfg.synthetic_params.level);
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    expect_keys(s, {"history_end", "horizon", "validation_folds"}, "'split'");
    read_key(s, "history_end", cfg.split.history_end);
    read_key(s, "horizon", cfg.split.horizon);
    read_key(s, "validation_folds", cfg.split.validation_folds);
  }

  read_key(j, "methods", cfg.methods);
  read_key(j, "samples", cfg.samples);
  read_key(j, "seed", cfg.seed);
  read_key(j, "ar_order", cfg.ar_order);
  read_key(j, "out", cfg.out_dir);

  if (j.contains("train")) {
    const auto& t = j.at("train");
    expect_keys(t,
                {"hidden", "layers", "dropout", "epochs", "lambda",
                 "learning_rate", "batch_multiplier", "windows_per_epoch",
                 "context", "horizon", "kl_mode", "kl_samples",
                 "embedding_dim", "grad_clip", "seasonal_period"},
                "'train'");
    read_key(t, "hidden", cfg.train.hidden);
    read_key(t, "layers", cfg.train.layers);
    read_key(t, "dropout", cfg.train.dropout);
    read_key(t, "epochs", cfg.train.epochs);
    read_key(t, "lambda", cfg.train.lambda);
    read_key(t, "learning_rate", cfg.train.learning_rate);
    read_key(t, "batch_multiplier", cfg.train.batch_multiplier);
    read_key(t, "windows_per_epoch", cfg.train.windows_per_epoch);
    read_key(t, "context", cfg.train.context);
    read_key(t, "horizon", cfg.train.horizon);
    if (t.contains("kl_mode"))
      cfg.train.kl_mode =
          kl_mode_from_string(t.at("kl_mode").get<std::string>());
    read_key(t, "kl_samples", cfg.train.kl_samples);
    read_key(t, "embedding_dim", cfg.train.embedding_dim);
    read_key(t, "grad_clip", cfg.train.grad_clip);
    read_key(t, "seasonal_period", cfg.train.seasonal_period);
  }

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    expect_keys(g, {"lambda", "hidden", "layers", "dropout", "epochs"},
                "'grid'");
    read_key(g, "lambda", cfg.grid_lambdas);
    read_key(g, "hidden", cfg.grid_hidden);
    read_key(g, "layers", cfg.grid_layers);
    read_key(g, "dropout", cfg.grid_dropout);
    read_key(g, "epochs", cfg.grid_epochs);
  }

  read_key(j, "mcb_constant", cfg.mcb.critical_constant);
  cfg.validate();
  return cfg;
}

std::string config_reference() {
  return R"(Experiment config (JSON). Keys and defaults:

hierarchy        (required) path to the edge-list file, lines "child,parent",
                 root listed with an empty parent
data             path to a panel CSV (header: timestamp,<node>,...); mutually
                 optional with `synthetic`
ingest_mode      "bottom" (default; upper series derived) or "all" (every
                 node present, coherency verified)
synthetic        generate the panel instead of reading one:
  length             200    total steps
  ar                 [[0.6]] AR coefficients per bottom node (one list is
                            broadcast to all)
  noise_scale        1.0
  seasonal_period    0      0 disables seasonality
  seasonal_amplitude 0.0
  level              [10.0] stationary level per bottom node (broadcast)
split
  history_end        0      conditioning range length (required)
  horizon            0      test range length (required)
  validation_folds   3      rolling-origin folds for the grid search
methods          default: the 12 classical combinations {ar,ses} x
                 {stack,rank,random} x {bu,mint} plus deepar-hier and
                 pure-deepar. Classical syntax:
                 <base>-<arrangement>-<reconciler>[-<covariance>] with
                 base in {ar,ses,holt}, arrangement in {stack,rank,random},
                 reconciler in {bu,td,mint,none}, covariance in {struct,ols}
                 (mint only, default struct)
samples          500    joint sample draws per step
seed             1      master seed; every stage derives from it
ar_order         4      AR lag order
out              output directory (CLI --out overrides)
train            deep-method configuration:
  hidden             20     recurrent width, 10..30
  layers             2      2..5
  dropout            0.1    0.1..0.2
  epochs             30     20..60
  lambda             0.0    coherence penalty weight
  learning_rate      0.01
  batch_multiplier   2      windows per batch (each window spans all nodes)
  windows_per_epoch  16
  context            16     conditioning steps per window
  horizon            8      prediction steps per window
  kl_mode            "closed" or "sampled"
  kl_samples         100    draws per edge in sampled mode
  embedding_dim      4
  grad_clip          10.0
  seasonal_period    0      adds sin/cos inputs when > 0
grid             candidate axes for deepar-hier (missing axis = the value
                 from `train`):
  lambda             e.g. [0.0, 0.1, 1.0]
  hidden             e.g. [10, 20]
  layers, dropout, epochs   likewise
mcb_constant     0      studentized-range constant; 0 picks the built-in
                        95% table
)";
}

SeriesPanel load_panel(const ExperimentConfig& config,
                       const HierarchySpec& hierarchy) {
  SeriesPanel panel;
  if (!config.data_file.empty()) {
    panel = ingest_csv(config.data_file, hierarchy, config.ingest_mode);
  } else if (config.synthetic) {
    panel = generate_synthetic(hierarchy, config.synthetic_length,
                               sub_seed(mix_seed(config.seed), kDataStream),
                               config.synthetic_params);
  } else {
    throw ExperimentError("no data source configured");
  }
  config.split.validate(panel.length());
  return panel;
}

GaussianForecast base_forecasts(const SeriesPanel& history, ForecasterKind kind,
                                int order, int horizon,
                                std::vector<std::string>* notes) {
  const int n = history.node_count();
  GaussianForecast out;
  out.mu.resize(n, horizon);
  out.sigma.resize(n, horizon);
  if (notes) notes->assign(static_cast<std::size_t>(n), "");
  for (int i = 0; i < n; ++i) {
    BaseForecaster f;
    try {
      f = fit_forecaster(history.values.row(i).transpose(), kind, order);
    } catch (const std::exception& e) {
      throw ExperimentError("node '" + history.node_ids[static_cast<std::size_t>(i)] +
                            "': " + e.what());
    }
    if (notes && !f.note.empty())
      (*notes)[static_cast<std::size_t>(i)] = f.note;
    const GaussianForecast g = forecast_gaussian(f, horizon);
    out.mu.row(i) = g.mu.row(0);
    out.sigma.row(i) = g.sigma.row(0);
  }
  return out;
}

void write_sample_forecast(const SampleForecast& samples,
                           const std::vector<std::string>& node_ids,
                           const std::string& path) {
  std::ostringstream out;
  out << "step,node";
  for (int k = 0; k < samples.sample_count; ++k) out << ",s" << k;
  out << '\n';
  for (int t = 0; t < samples.horizon(); ++t) {
    const auto& step = samples.steps[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < step.rows(); ++i) {
      out << t << ',' << node_ids[static_cast<std::size_t>(i)];
      for (Eigen::Index k = 0; k < step.cols(); ++k)
        out << ',' << format_double(step(i, k));
      out << '\n';
    }
  }
  write_text_file(path, out.str());
}

SampleForecast read_sample_forecast(const std::string& path,
                                    const HierarchySpec& hierarchy) {
  const CsvTable table = read_csv_table(path);
  if (table.header.size() < 3 || table.header[0] != "step" ||
      table.header[1] != "node")
    throw ExperimentError("'" + path + "' is not a sample forecast file");
  const int N = static_cast<int>(table.header.size()) - 2;
  const int n = hierarchy.node_count();
  if (table.rows.empty() || table.rows.size() % static_cast<std::size_t>(n) != 0)
    throw ExperimentError("'" + path + "' does not cover every node");
  const int h = static_cast<int>(table.rows.size()) / n;

  SampleForecast out;
  out.sample_count = N;
  out.steps.assign(static_cast<std::size_t>(h), Eigen::MatrixXd::Zero(n, N));
  std::vector<std::vector<bool>> seen(static_cast<std::size_t>(h),
                                      std::vector<bool>(static_cast<std::size_t>(n), false));
  for (const auto& row : table.rows) {
    if (static_cast<int>(row.size()) != N + 2)
      throw ExperimentError("'" + path + "': ragged row");
    int t;
    try {
      t = std::stoi(row[0]);
    } catch (const std::exception&) {
      throw ExperimentError("'" + path + "': bad step '" + row[0] + "'");
    }
    if (t < 0 || t >= h)
      throw ExperimentError("'" + path + "': step " + row[0] +
                            " out of range");
    const int i = hierarchy.index_of(row[1]);
    if (seen[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])
      throw ExperimentError("'" + path + "': duplicate row for node '" +
                            row[1] + "' step " + row[0]);
    seen[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = true;
    for (int k = 0; k < N; ++k)
      out.steps[static_cast<std::size_t>(t)](i, k) =
          std::stod(row[static_cast<std::size_t>(k) + 2]);
  }
  for (const auto& st : seen)
    for (bool s : st)
      if (!s) throw ExperimentError("'" + path + "' does not cover every node");
  return out;
}

void write_gaussian_forecast(const GaussianForecast& forecast,
                             const std::vector<std::string>& node_ids,
                             const std::string& path) {
  std::ostringstream out;
  out << "step,node,mu,sigma\n";
  for (int t = 0; t < forecast.horizon(); ++t)
    for (int i = 0; i < forecast.node_count(); ++i)
      out << t << ',' << node_ids[static_cast<std::size_t>(i)] << ','
          << format_double(forecast.mu(i, t)) << ','
          << format_double(forecast.sigma(i, t)) << '\n';
  write_text_file(path, out.str());
}

GaussianForecast read_gaussian_forecast(const std::string& path,
                                        const HierarchySpec& hierarchy) {
  const CsvTable table = read_csv_table(path);
  if (table.header != std::vector<std::string>{"step", "node", "mu", "sigma"})
    throw ExperimentError("'" + path + "' is not a gaussian forecast file");
  const int n = hierarchy.node_count();
  if (table.rows.empty() || table.rows.size() % static_cast<std::size_t>(n) != 0)
    throw ExperimentError("'" + path + "' does not cover every node");
  const int h = static_cast<int>(table.rows.size()) / n;
  GaussianForecast out;
  out.mu = Eigen::MatrixXd::Zero(n, h);
  out.sigma = Eigen::MatrixXd::Zero(n, h);
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw ExperimentError("'" + path + "': ragged row");
    try {
      const int t = std::stoi(row[0]);
      if (t < 0 || t >= h)
        throw ExperimentError("step out of range");
      const int i = hierarchy.index_of(row[1]);
      out.mu(i, t) = std::stod(row[2]);
      out.sigma(i, t) = std::stod(row[3]);
    } catch (const ExperimentError&) {
      throw;
    } catch (const std::exception& e) {
      throw ExperimentError("'" + path + "': bad row (" + e.what() + ")");
    }
  }
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "node,level,method,crps\n";
  for (std::size_t i = 0; i < report.node_ids.size(); ++i)
    out << report.node_ids[i] << ',' << report.levels[i] << ','
        << report.method << ','
        << format_double(report.node_means[static_cast<Eigen::Index>(i)])
        << '\n';
  return out.str();
}

namespace {

std::string crps_steps_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "node,step,crps\n";
  for (std::size_t i = 0; i < report.node_ids.size(); ++i)
    for (Eigen::Index t = 0; t < report.crps.cols(); ++t)
      out << report.node_ids[i] << ',' << t << ','
          << format_double(report.crps(static_cast<Eigen::Index>(i), t))
          << '\n';
  return out.str();
}

std::string loss_trace_csv(const std::vector<double>& trace) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e)
    out << e << ',' << format_double(trace[e]) << '\n';
  return out.str();
}

EvalReport run_classical(const ExperimentConfig& config,
                         const HierarchySpec& hierarchy,
                         const SeriesPanel& history, const SeriesPanel& test,
                         const SummingMatrix& S, const MethodSpec& spec,
                         const std::string& dir) {
  std::vector<std::string> notes;
  const GaussianForecast base = base_forecasts(
      history, spec.base, config.ar_order, config.split.horizon, &notes);
  write_gaussian_forecast(base, hierarchy.nodes(),
                          (fs::path(dir) / "base_forecast.csv").string());
  std::ostringstream note_text;
  for (std::size_t i = 0; i < notes.size(); ++i)
    if (!notes[i].empty())
      note_text << hierarchy.node_id(static_cast<int>(i)) << ": " << notes[i]
                << '\n';
  if (!note_text.str().empty()) write_file(dir, "notes.txt", note_text.str());

  const std::uint64_t method_base =
      mix_seed(config.seed ^ hash_label(spec.label));
  const SampleForecast raw = arrange_forecast(
      base, spec.arrangement, config.samples, sub_seed(method_base, kArrangeStream));
  write_sample_forecast(raw, hierarchy.nodes(),
                        (fs::path(dir) / "samples_raw.csv.gz").string());

  SampleForecast final_samples = raw;
  if (spec.reconciled) {
    ReconciliationMap map;
    switch (spec.reconciler) {
      case ReconcileMethod::Bu: map = build_bu(S); break;
      case ReconcileMethod::Td: map = build_td(S, history); break;
      case ReconcileMethod::Mint: map = build_mint(S, spec.covariance); break;
    }
    write_matrix_csv(map.P, (fs::path(dir) / "P.csv").string());
    write_matrix_csv(S.entries * map.P, (fs::path(dir) / "SP.csv").string());
    final_samples = reconcile_samples(map, S, raw);
  }
  write_sample_forecast(final_samples, hierarchy.nodes(),
                        (fs::path(dir) / "samples.csv.gz").string());
  return evaluate(final_samples, test, hierarchy, spec.label);
}

EvalReport run_deep(const ExperimentConfig& config,
                    const HierarchySpec& hierarchy, const SeriesPanel& history,
                    const SeriesPanel& test, const SummingMatrix& S,
                    const MethodSpec& spec, const std::string& dir) {
  const std::uint64_t base = deep_base(config);

  TrainConfig tc = config.train;
  if (spec.regularized) {
    const GridResult grid = grid_search(config, hierarchy, history, true);
    tc = grid.best;
    if (!grid.table_csv.empty()) write_file(dir, "grid.csv", grid.table_csv);
  } else {
    tc.lambda = 0.0;
  }
  tc.seed = sub_seed(base, kTrainStream);

  const TrainedModel model = train(history, hierarchy, tc);
  save_model(model, (fs::path(dir) / "model.json").string());
  write_file(dir, "loss_trace.csv", loss_trace_csv(model.loss_trace));

  const ForecastResult fr =
      forecast(model, history, config.split.horizon, config.samples,
               sub_seed(base, kForecastStream));
  write_gaussian_forecast(fr.gaussian, hierarchy.nodes(),
                          (fs::path(dir) / "gaussian.csv").string());

  // pre-hardening coherence of the predictive means, step by step
  std::ostringstream coh;
  coh << "step,residual\n";
  double mean_residual = 0.0;
  for (int t = 0; t < fr.gaussian.horizon(); ++t) {
    const double r = coherency_residual(S, fr.gaussian.mu.col(t));
    coh << t << ',' << format_double(r) << '\n';
    mean_residual += r;
  }
  mean_residual /= std::max(1, fr.gaussian.horizon());
  coh << "mean," << format_double(mean_residual) << '\n';
  write_file(dir, "coherence.csv", coh.str());

  write_sample_forecast(fr.samples, hierarchy.nodes(),
                        (fs::path(dir) / "samples_raw.csv.gz").string());
  const SampleForecast hardened = harden_bottom_up(fr.samples, S);
  write_sample_forecast(hardened, hierarchy.nodes(),
                        (fs::path(dir) / "samples.csv.gz").string());
  return evaluate(hardened, test, hierarchy, spec.label);
}

}  // namespace

EvalReport run_method(const ExperimentConfig& config,
                      const HierarchySpec& hierarchy,
                      const SeriesPanel& panel, const std::string& method) {
  const MethodSpec spec = MethodSpec::parse(method);
  if (config.out_dir.empty())
    throw ExperimentError("method '" + method + "': no output directory");
  const std::string dir = (fs::path(config.out_dir) / spec.label).string();
  fs::create_directories(dir);

  try {
    config.split.validate(panel.length());
    const SeriesPanel history = panel.slice(0, config.split.history_end);
    const SeriesPanel test =
        panel.slice(config.split.history_end, config.split.horizon);
    const SummingMatrix S = build_summing_matrix(hierarchy);

    EvalReport report =
        spec.deep
            ? run_deep(config, hierarchy, history, test, S, spec, dir)
            : run_classical(config, hierarchy, history, test, S, spec, dir);
    write_file(dir, "report.csv", report_csv(report));
    write_file(dir, "crps_steps.csv", crps_steps_csv(report));
    return report;
  } catch (const ExperimentError& e) {
    const std::string what = e.what();
    if (what.rfind("method '", 0) == 0) throw;
    throw ExperimentError("method '" + method + "': " + what);
  } catch (const std::exception& e) {
    throw ExperimentError("method '" + method + "': " + e.what());
  }
}

GridResult grid_search(const ExperimentConfig& config,
                       const HierarchySpec& hierarchy,
                       const SeriesPanel& history, bool regularized) {
  const int folds = config.split.validation_folds;
  if (folds < 1)
    throw ExperimentError("grid search needs at least 1 validation fold");
  const int h = config.split.horizon;
  const int L = history.length();

  std::vector<double> lambdas =
      regularized ? config.grid_lambdas : std::vector<double>{0.0};
  if (lambdas.empty()) lambdas = {config.train.lambda};
  std::vector<int> hiddens = config.grid_hidden;
  if (hiddens.empty()) hiddens = {config.train.hidden};
  std::vector<int> layer_counts = config.grid_layers;
  if (layer_counts.empty()) layer_counts = {config.train.layers};
  std::vector<double> dropouts = config.grid_dropout;
  if (dropouts.empty()) dropouts = {config.train.dropout};
  std::vector<int> epoch_counts = config.grid_epochs;
  if (epoch_counts.empty()) epoch_counts = {config.train.epochs};

  std::vector<TrainConfig> candidates;
  for (double lam : lambdas)
    for (int hid : hiddens)
      for (int lay : layer_counts)
        for (double drop : dropouts)
          for (int ep : epoch_counts) {
            TrainConfig tc = config.train;
            tc.lambda = lam;
            tc.hidden = hid;
            tc.layers = lay;
            tc.dropout = drop;
            tc.epochs = ep;
            tc.validate();
            candidates.push_back(tc);
          }
  if (candidates.empty()) throw ExperimentError("empty hyperparameter grid");

  GridResult result;
  if (candidates.size() == 1) {
    result.best = candidates.front();
    return result;
  }

  const int first_origin = L - folds * h;
  if (first_origin < config.train.context + config.train.horizon)
    throw ExperimentError(
        "validation folds do not fit: first training range has " +
        std::to_string(first_origin) + " steps, need at least " +
        std::to_string(config.train.context + config.train.horizon));

  const std::uint64_t base = deep_base(config);
  const SummingMatrix S = build_summing_matrix(hierarchy);

  std::ostringstream table;
  table << "lambda,hidden,layers,dropout,epochs,fold,crps\n";
  double best_score = 0.0;
  std::size_t best_at = 0;
  bool have_best = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    TrainConfig tc = candidates[c];
    double mean_score = 0.0;
    for (int f = 0; f < folds; ++f) {
      const int origin = L - (folds - f) * h;
      const SeriesPanel fold_train = history.slice(0, origin);
      const SeriesPanel fold_valid = history.slice(origin, h);
      tc.seed = sub_seed(base, kFoldTrainStream + static_cast<std::uint64_t>(f));
      const TrainedModel model = train(fold_train, hierarchy, tc);
      const ForecastResult fr = forecast(
          model, fold_train, h, config.samples,
          sub_seed(base, kFoldForecastStream + static_cast<std::uint64_t>(f)));
      const EvalReport report =
          evaluate(harden_bottom_up(fr.samples, S), fold_valid, hierarchy);
      mean_score += report.overall_mean;
      table << format_double(tc.lambda) << ',' << tc.hidden << ','
            << tc.layers << ',' << format_double(tc.dropout) << ','
            << tc.epochs << ',' << f << ','
            << format_double(report.overall_mean) << '\n';
    }
    mean_score /= folds;
    table << format_double(tc.lambda) << ',' << tc.hidden << ',' << tc.layers
          << ',' << format_double(tc.dropout) << ',' << tc.epochs << ",mean,"
          << format_double(mean_score) << '\n';

    const auto& cur = candidates[c];
    const auto& best = candidates[best_at];
    const bool better =
        !have_best || mean_score < best_score ||
        (mean_score == best_score &&
         (cur.lambda < best.lambda ||
          (cur.lambda == best.lambda && cur.hidden < best.hidden)));
    if (better) {
      best_score = mean_score;
      best_at = c;
      have_best = true;
    }
  }

  result.best = candidates[best_at];
  result.table_csv = table.str();
  return result;
}

ComparisonResult run_comparison(const ExperimentConfig& config) {
  config.validate();
  if (config.methods.size() < 2)
    throw ExperimentError("comparison needs at least 2 methods");
  if (config.out_dir.empty())
    throw ExperimentError("comparison needs an output directory");
  fs::create_directories(config.out_dir);

  const HierarchySpec hierarchy = HierarchySpec::from_file(config.hierarchy_file);
  const SeriesPanel panel = load_panel(config, hierarchy);
  const SummingMatrix S = build_summing_matrix(hierarchy);
  write_matrix_csv(S.entries, (fs::path(config.out_dir) / "S.csv").string());

  ComparisonResult result;
  for (const auto& method : config.methods) {
    try {
      result.reports.push_back(run_method(config, hierarchy, panel, method));
    } catch (const std::exception& e) {
      write_file(config.out_dir, "aborted.txt",
                 std::string("comparison aborted; partial results above are "
                             "valid\n") +
                     e.what() + "\n");
      throw;
    }
  }

  std::ostringstream per_node;
  per_node << "node,level,method,crps\n";
  for (const auto& report : result.reports) {
    std::istringstream body(report_csv(report));
    std::string line;
    std::getline(body, line);  // drop the header
    while (std::getline(body, line)) per_node << line << '\n';
  }
  write_file(config.out_dir, "scores_per_node.csv", per_node.str());

  std::ostringstream overall;
  overall << "method,mean_crps\n";
  for (const auto& report : result.reports)
    overall << report.method << ',' << format_double(report.overall_mean)
            << '\n';
  write_file(config.out_dir, "summary_overall.csv", overall.str());

  std::ostringstream levels;
  levels << "method";
  for (int l = 1; l <= hierarchy.level_count(); ++l) levels << ",level_" << l;
  levels << '\n';
  for (const auto& report : result.reports) {
    levels << report.method;
    for (double v : report.level_means) levels << ',' << format_double(v);
    levels << '\n';
  }
  write_file(config.out_dir, "summary_levels.csv", levels.str());

  const int k = static_cast<int>(result.reports.size());
  const int n = hierarchy.node_count();
  Eigen::MatrixXd scores(k, n);
  std::vector<std::string> names;
  for (int m = 0; m < k; ++m) {
    scores.row(m) = result.reports[static_cast<std::size_t>(m)].node_means.transpose();
    names.push_back(result.reports[static_cast<std::size_t>(m)].method);
  }
  result.mcb = mcb(scores, names, config.mcb);
  write_file(config.out_dir, "mcb.csv", mcb_csv(result.mcb));
  write_mcb_svg(result.mcb, (fs::path(config.out_dir) / "mcb.svg").string());
  return result;
}

}  // namespace hiercast
