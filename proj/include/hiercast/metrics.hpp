#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiercast/forecast_types.hpp"
#include "hiercast/hierarchy.hpp"
#include "hiercast/panel.hpp"

namespace hiercast {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Energy-form estimator mean|X - y| - 0.5 mean|X - X'|, the pair mean taken
// over all N^2 ordered pairs; computed in O(N log N) via the sorted form.
double crps_empirical(const Eigen::VectorXd& samples, double y);

// Closed form for N(mu, sigma^2): sigma * [z(2 Phi(z) - 1) + 2 phi(z)
// - 1/sqrt(pi)] with z = (y - mu) / sigma.
double crps_gaussian(double mu, double sigma, double y);

struct EvalReport {
  std::string method;
  std::vector<std::string> node_ids;
  std::vector<int> levels;          // per node, root = 1
  Eigen::MatrixXd crps;             // n x h
  Eigen::VectorXd node_means;       // per node, averaged over steps
  std::vector<double> level_means;  // level 1 at index 0
  double overall_mean = 0.0;        // mean over nodes
};

// Per-node CRPS of the joint samples against the realized prediction range.
// actuals must hold exactly the forecast horizon.
EvalReport evaluate(const SampleForecast& forecast, const SeriesPanel& actuals,
                    const HierarchySpec& hierarchy,
                    const std::string& method = "");

struct McbOptions {
  // Studentized-range critical constant; 0 picks the built-in 95% table by
  // method count.
  double critical_constant = 0.0;
};

struct McbResult {
  std::vector<std::string> methods;
  Eigen::VectorXd average_rank;
  double half_width = 0.0;
  // overlap(i, j) is true when the two rank intervals intersect; methods
  // with disjoint intervals differ significantly.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> overlap;
};

// Average-rank comparison over a methods x instances score table (lower
// score is better). Ties within an instance share the average rank.
McbResult mcb(const Eigen::MatrixXd& scores,
              const std::vector<std::string>& method_names,
              const McbOptions& options = {});

// rank-and-interval rows: method,average_rank,lower,upper.
std::string mcb_csv(const McbResult& result);

// Dot-and-interval chart, best method at the bottom, with the best interval
// shaded across the panel. Byte-deterministic.
void write_mcb_svg(const McbResult& result, const std::string& path);

}  // namespace hiercast
