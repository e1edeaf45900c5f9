#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace hiercast {

// Per-node, per-step Gaussian predictive parameters. Rows follow the
// canonical node order, columns are horizon steps.
struct GaussianForecast {
  Eigen::MatrixXd mu;     // n x h
  Eigen::MatrixXd sigma;  // n x h, strictly positive
  int horizon() const { return static_cast<int>(mu.cols()); }
  int node_count() const { return static_cast<int>(mu.rows()); }
};

// Joint predictive samples: one n x N matrix per horizon step. Each column is
// one draw from the joint distribution over all nodes.
struct SampleForecast {
  std::vector<Eigen::MatrixXd> steps;
  int sample_count = 0;
  std::uint64_t seed = 0;
  int horizon() const { return static_cast<int>(steps.size()); }
  int node_count() const {
    return steps.empty() ? 0 : static_cast<int>(steps.front().rows());
  }
};

}  // namespace hiercast
