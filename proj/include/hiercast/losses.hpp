#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiercast/autodiff.hpp"
#include "hiercast/hierarchy.hpp"

// Loss terms for the recurrent forecaster, templated over the scalar type so
// the same code runs on tape variables (training) and plain doubles (finite
// difference oracles).

namespace hiercast {

struct LossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class KlMode { ClosedForm, Sampled };

std::string to_string(KlMode mode);
KlMode kl_mode_from_string(const std::string& name);

template <typename T>
struct GaussianParam {
  T mu;
  T sigma;
};

// Negative log density of y under N(mu, sigma^2), summed over all entries.
// outputs[i][t] pairs with y(i, t).
template <typename T>
T nll_loss(const std::vector<std::vector<GaussianParam<T>>>& outputs,
           const Eigen::MatrixXd& y) {
  constexpr double kHalfLog2Pi = 0.9189385332046727;
  const auto n = outputs.size();
  if (n == 0 || static_cast<Eigen::Index>(n) != y.rows())
    throw LossError("output rows do not match the observations");
  T total{};
  bool first = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(outputs[i].size()) != y.cols())
      throw LossError("output steps do not match the observations");
    for (std::size_t t = 0; t < outputs[i].size(); ++t) {
      const auto& p = outputs[i][t];
      const double obs = y(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(t));
      if (!std::isfinite(value_of(p.mu)) || !std::isfinite(value_of(p.sigma)) ||
          !std::isfinite(obs))
        throw LossError("non-finite input to the likelihood");
      if (value_of(p.sigma) <= 0.0)
        throw LossError("sigma must be positive");
      T z = (obs - p.mu) / p.sigma;
      T term = kHalfLog2Pi + log(p.sigma) + 0.5 * square(z);
      total = first ? term : total + term;
      first = false;
    }
  }
  return total;
}

// KL(N(a) || N(b)) in closed form.
template <typename T>
T kl_gaussian(const GaussianParam<T>& a, const GaussianParam<T>& b) {
  if (value_of(a.sigma) <= 0.0 || value_of(b.sigma) <= 0.0)
    throw LossError("sigma must be positive");
  T ratio = square(a.sigma / b.sigma);
  T shift = square((a.mu - b.mu) / b.sigma);
  return 0.5 * (ratio + shift) - 0.5 * log(ratio) - 0.5;
}

// Symmetrized KL between a parent and the sum of its (independent) children:
// the sum is N(sum mu_c, sum sigma_c^2).
template <typename T>
T kl_gaussian_symmetric(const GaussianParam<T>& parent,
                        const std::vector<GaussianParam<T>>& children) {
  if (children.empty()) throw LossError("parent has no children");
  T sum_mu = children[0].mu;
  T sum_var = square(children[0].sigma);
  for (std::size_t c = 1; c < children.size(); ++c) {
    sum_mu = sum_mu + children[c].mu;
    sum_var = sum_var + square(children[c].sigma);
  }
  GaussianParam<T> child_sum{sum_mu, sqrt(sum_var)};
  return 0.5 * (kl_gaussian(parent, child_sum) +
                kl_gaussian(child_sum, parent));
}

// Monte-Carlo version: reparameterized draws for the parent and for the child
// sum, Gaussian moments fitted to each set, closed-form KL between the fitted
// Gaussians, both directions averaged. The noise array supplies the standard
// normal draws, (1 + n_children) * n_kl of them starting at offset; gradients
// flow through mu and sigma only.
template <typename T>
T kl_sampled_symmetric(const GaussianParam<T>& parent,
                       const std::vector<GaussianParam<T>>& children, int n_kl,
                       const std::vector<double>& noise,
                       std::size_t offset = 0) {
  if (children.empty()) throw LossError("parent has no children");
  if (n_kl < 2) throw LossError("need at least 2 draws for the sampled kl");
  const std::size_t need =
      (1 + children.size()) * static_cast<std::size_t>(n_kl);
  if (noise.size() < offset + need)
    throw LossError("noise array too short for the sampled kl");

  auto moments = [n_kl](const std::vector<T>& draws) {
    T mean = draws[0];
    for (int k = 1; k < n_kl; ++k) mean = mean + draws[k];
    mean = mean / static_cast<double>(n_kl);
    T var = square(draws[0] - mean);
    for (int k = 1; k < n_kl; ++k) var = var + square(draws[k] - mean);
    var = var / static_cast<double>(n_kl - 1);
    return GaussianParam<T>{mean, sqrt(var)};
  };

  std::vector<T> draws(static_cast<std::size_t>(n_kl));
  for (int k = 0; k < n_kl; ++k)
    draws[static_cast<std::size_t>(k)] =
        parent.mu + parent.sigma * noise[offset + static_cast<std::size_t>(k)];
  const GaussianParam<T> parent_fit = moments(draws);

  for (int k = 0; k < n_kl; ++k) {
    std::size_t at = offset + static_cast<std::size_t>(n_kl + k);
    T sum = children[0].mu + children[0].sigma * noise[at];
    for (std::size_t c = 1; c < children.size(); ++c) {
      at += static_cast<std::size_t>(n_kl);
      sum = sum + children[c].mu + children[c].sigma * noise[at];
    }
    draws[static_cast<std::size_t>(k)] = sum;
  }
  const GaussianParam<T> sum_fit = moments(draws);

  return 0.5 *
         (kl_gaussian(parent_fit, sum_fit) + kl_gaussian(sum_fit, parent_fit));
}

// Standard normal draws total_loss consumes in sampled mode.
std::size_t kl_noise_size(const HierarchySpec& hierarchy, int n_kl, int steps);

// nll plus lambda times the per-edge symmetric KL summed over internal nodes
// and steps. Outputs are in scaled space; node_scale carries each node's
// scale factor so child parameters can be expressed in the parent's scale
// before summation (coherence lives in original units). lambda = 0 skips the
// KL code path entirely and equals nll_loss bit for bit.
template <typename T>
T total_loss(const std::vector<std::vector<GaussianParam<T>>>& outputs,
             const Eigen::MatrixXd& y, const HierarchySpec& hierarchy,
             const Eigen::VectorXd& node_scale, double lambda, KlMode kl_mode,
             int n_kl, const std::vector<double>& kl_noise) {
  if (static_cast<int>(outputs.size()) != hierarchy.node_count())
    throw LossError("batch must contain every node of the hierarchy");
  if (node_scale.size() != hierarchy.node_count())
    throw LossError("node scales do not match the hierarchy");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw LossError("lambda must be finite and non-negative");

  T total = nll_loss(outputs, y);
  if (lambda == 0.0) return total;

  const int steps = static_cast<int>(outputs[0].size());
  std::size_t cursor = 0;
  for (int i : hierarchy.internal_indices()) {
    const auto& child_ids = hierarchy.children_of(i);
    const double parent_scale = node_scale[i];
    for (int t = 0; t < steps; ++t) {
      const auto& pi = outputs[static_cast<std::size_t>(i)]
                              [static_cast<std::size_t>(t)];
      GaussianParam<T> parent{pi.mu, pi.sigma};
      std::vector<GaussianParam<T>> children;
      children.reserve(child_ids.size());
      for (int c : child_ids) {
        const auto& pc = outputs[static_cast<std::size_t>(c)]
                                [static_cast<std::size_t>(t)];
        const double rescale = node_scale[c] / parent_scale;
        children.push_back({pc.mu * rescale, pc.sigma * rescale});
      }
      T edge = kl_mode == KlMode::ClosedForm
                   ? kl_gaussian_symmetric(parent, children)
                   : kl_sampled_symmetric(parent, children, n_kl, kl_noise,
                                          cursor);
      if (kl_mode == KlMode::Sampled)
        cursor += (1 + child_ids.size()) * static_cast<std::size_t>(n_kl);
      total = total + lambda * edge;
    }
  }
  return total;
}

}  // namespace hiercast
