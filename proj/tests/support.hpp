#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hiercast/hierarchy.hpp"
#include "hiercast/panel.hpp"

namespace testsupport {

// The two-region retail tree used as the running example: a total, two
// regions with 3 and 2 stores.
hiercast::HierarchySpec two_region_hierarchy();

// Random tree with depth <= max_depth (root at depth 1) and at most
// max_bottom leaves; at least two levels. Deterministic per seed.
hiercast::HierarchySpec random_hierarchy(std::uint64_t seed, int max_depth = 4,
                                         int max_bottom = 64);

// Spearman rank correlation with tie-averaged ranks.
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// O(N^2) CRPS oracle: mean |x - y| - (1 / 2N^2) sum_ij |x_i - x_j|.
double crps_pairwise(const Eigen::VectorXd& samples, double y);

// CRPS of N(mu, sigma^2) by trapezoid integration of (F - step)^2.
double crps_gaussian_numeric(double mu, double sigma, double y);

// Brute-force per-instance tie-averaged ranks, averaged over instances.
Eigen::VectorXd average_ranks_oracle(const Eigen::MatrixXd& scores);

// Short coherent panel for model tests.
hiercast::SeriesPanel small_panel(const hiercast::HierarchySpec& hierarchy,
                                  int T, std::uint64_t seed);

// Unique path under the system temp directory; the directory itself is
// created.
std::string temp_dir(const std::string& tag);

}  // namespace testsupport
