#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiercast/forecast_types.hpp"
#include "hiercast/hierarchy.hpp"

namespace hiercast {

struct ArrangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Coupling used to assemble joint samples from per-node marginal draws:
// stack keeps generation order, rank sorts each node's draws (comonotonic),
// random applies an independent seeded permutation per node.
enum class Arrangement { Stack, Rank, Random };

std::string to_string(Arrangement arrangement);
Arrangement arrangement_from_string(const std::string& name);

struct NodeDraws {
  std::string node_id;
  Eigen::VectorXd values;
};

// Single-step arrangements. Input rows may arrive in any order; output rows
// are reordered to the hierarchy's node order. Every node must supply the
// same number of draws, and at least 2.
SampleForecast arrange_stack(const std::vector<NodeDraws>& marginals,
                             const HierarchySpec& hierarchy,
                             std::uint64_t seed);
SampleForecast arrange_rank(const std::vector<NodeDraws>& marginals,
                            const HierarchySpec& hierarchy, std::uint64_t seed);
SampleForecast arrange_random(const std::vector<NodeDraws>& marginals,
                              const HierarchySpec& hierarchy,
                              std::uint64_t seed);

// n_samples independent Gaussian draws per node and step; rows already follow
// the forecast's node order.
SampleForecast draw_marginal_samples(const GaussianForecast& forecast,
                                     int n_samples, std::uint64_t seed);

// Draws marginal samples and applies the arrangement to every horizon step.
SampleForecast arrange_forecast(const GaussianForecast& forecast,
                                Arrangement arrangement, int n_samples,
                                std::uint64_t seed);

}  // namespace hiercast
