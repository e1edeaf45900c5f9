#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiercast/forecast_types.hpp"
#include "hiercast/hierarchy.hpp"
#include "hiercast/losses.hpp"
#include "hiercast/panel.hpp"
#include "hiercast/rng.hpp"

namespace hiercast {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int hidden = 20;       // recurrent width, 10..30
  int layers = 2;        // stacked cells, 2..5
  double dropout = 0.1;  // on non-recurrent connections, 0.1..0.2
  int epochs = 30;       // 20..60
  double lambda = 0.0;   // weight of the coherence penalty
  double learning_rate = 1e-2;
  int batch_multiplier = 2;    // windows per batch; every batch holds all nodes
  int windows_per_epoch = 16;  // window starts sampled per epoch
  int context = 16;            // conditioning steps per window
  int horizon = 8;             // prediction steps per window
  std::uint64_t seed = 1;
  KlMode kl_mode = KlMode::ClosedForm;
  int kl_samples = 100;  // draws per edge in sampled mode
  int embedding_dim = 4;
  double grad_clip = 10.0;
  int seasonal_period = 0;  // adds sin/cos covariates when > 0

  void validate() const;
};

// Weights plus everything needed to reproduce forecasts: config, per-node
// scales, the hierarchy the model was trained against, and the loss trace.
struct TrainedModel {
  TrainConfig config;
  std::vector<std::string> node_ids;
  std::string hierarchy_edges;  // edge-list serialization
  Eigen::VectorXd scale;
  std::vector<double> weights;
  std::vector<double> loss_trace;  // mean batch loss per epoch

  HierarchySpec hierarchy() const;
};

// Trains the shared recurrent net on the panel (which is the conditioning
// history; all of it is used). Deterministic given config.seed.
TrainedModel train(const SeriesPanel& panel, const HierarchySpec& hierarchy,
                   const TrainConfig& config);

// Rolls the net over the conditioning panel (teacher forcing), then h steps
// ahead feeding each step's predictive mean. Returns per-step Gaussian
// parameters and n_samples reparameterized draws, both in original units.
struct ForecastResult {
  GaussianForecast gaussian;
  SampleForecast samples;
};

ForecastResult forecast(const TrainedModel& model, const SeriesPanel& panel,
                        int horizon, int n_samples, std::uint64_t seed);

// Replaces every upper row by the sum of its bottom descendants.
SampleForecast harden_bottom_up(const SampleForecast& samples,
                                const SummingMatrix& S);

// Round-trips reproduce forecasts bit-exactly.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

namespace detail {

// Flat parameter layout of the net for a given config and node count.
int parameter_count(int n_nodes, const TrainConfig& config);

std::vector<double> init_parameters(int n_nodes, const TrainConfig& config,
                                    Rng& rng);

// Training loss of a batch of windows at the given parameters, averaged over
// windows. With grad set, runs on the tape and fills d(loss)/d(params);
// otherwise runs on plain doubles (the finite-difference path). Dropout is
// off unless dropout_mask is given (layout documented in the source).
double batch_loss(const HierarchySpec& hierarchy, const Eigen::MatrixXd& scaled,
                  const Eigen::VectorXd& node_scale, const TrainConfig& config,
                  const std::vector<int>& window_starts,
                  const std::vector<double>& kl_noise,
                  const std::vector<double>& params,
                  const std::vector<double>* dropout_mask,
                  std::vector<double>* grad);

std::size_t dropout_mask_size(int n_nodes, const TrainConfig& config,
                              int n_windows);

}  // namespace detail

}  // namespace hiercast
