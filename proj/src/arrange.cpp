#include "hiercast/arrange.hpp"

#include <algorithm>
#include <unordered_set>

#include "hiercast/rng.hpp"

namespace hiercast {

std::string to_string(Arrangement arrangement) {
  switch (arrangement) {
    case Arrangement::Stack: return "stack";
    case Arrangement::Rank: return "rank";
    case Arrangement::Random: return "random";
  }
  return "?";
}

Arrangement arrangement_from_string(const std::string& name) {
  if (name == "stack") return Arrangement::Stack;
  if (name == "rank") return Arrangement::Rank;
  if (name == "random") return Arrangement::Random;
  throw ArrangeError("unknown arrangement '" + name + "'");
}

namespace {

// Reorders the incoming rows to the hierarchy's node order and validates the
// draw counts.
Eigen::MatrixXd collect_rows(const std::vector<NodeDraws>& marginals,
                             const HierarchySpec& hierarchy) {
  const int n = hierarchy.node_count();
  if (static_cast<int>(marginals.size()) != n)
    throw ArrangeError("expected draws for " + std::to_string(n) +
                       " nodes, got " + std::to_string(marginals.size()));
  const auto N = marginals.front().values.size();
  if (N < 2) throw ArrangeError("need at least 2 draws per node");

  Eigen::MatrixXd rows(n, N);
  std::unordered_set<std::string> seen;
  for (const auto& draws : marginals) {
    if (!hierarchy.has_node(draws.node_id))
      throw ArrangeError("draws for unknown node '" + draws.node_id + "'");
    if (!seen.insert(draws.node_id).second)
      throw ArrangeError("duplicate draws for node '" + draws.node_id + "'");
    if (draws.values.size() != N)
      throw ArrangeError("node '" + draws.node_id + "' supplies " +
                         std::to_string(draws.values.size()) +
                         " draws, expected " + std::to_string(N));
    rows.row(hierarchy.index_of(draws.node_id)) = draws.values.transpose();
  }
  return rows;
}

void sort_rows(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::RowVectorXd row = rows.row(i);
    std::sort(row.data(), row.data() + row.size());
    rows.row(i) = row;
  }
}

void permute_rows(Eigen::MatrixXd& rows, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Rng row_rng = rng.fork(static_cast<std::uint64_t>(i));
    for (Eigen::Index k = rows.cols() - 1; k > 0; --k) {
      const auto j = static_cast<Eigen::Index>(
          row_rng.integer(static_cast<std::uint64_t>(k) + 1));
      std::swap(rows(i, k), rows(i, j));
    }
  }
}

SampleForecast wrap_single_step(Eigen::MatrixXd rows, std::uint64_t seed) {
  SampleForecast out;
  out.sample_count = static_cast<int>(rows.cols());
  out.seed = seed;
  out.steps.push_back(std::move(rows));
  return out;
}

}  // namespace

SampleForecast arrange_stack(const std::vector<NodeDraws>& marginals,
                             const HierarchySpec& hierarchy,
                             std::uint64_t seed) {
  return wrap_single_step(collect_rows(marginals, hierarchy), seed);
}

SampleForecast arrange_rank(const std::vector<NodeDraws>& marginals,
                            const HierarchySpec& hierarchy,
                            std::uint64_t seed) {
  Eigen::MatrixXd rows = collect_rows(marginals, hierarchy);
  sort_rows(rows);
  return wrap_single_step(std::move(rows), seed);
}

SampleForecast arrange_random(const std::vector<NodeDraws>& marginals,
                              const HierarchySpec& hierarchy,
                              std::uint64_t seed) {
  Eigen::MatrixXd rows = collect_rows(marginals, hierarchy);
  permute_rows(rows, seed);
  return wrap_single_step(std::move(rows), seed);
}

SampleForecast draw_marginal_samples(const GaussianForecast& forecast,
                                     int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw ArrangeError("need at least 2 draws per node");
  const int n = forecast.node_count();
  const int h = forecast.horizon();
  if (n == 0 || h == 0) throw ArrangeError("empty forecast");

  SampleForecast out;
  out.sample_count = n_samples;
  out.seed = seed;
  Rng rng(seed);
  for (int step = 0; step < h; ++step) {
    Rng step_rng = rng.fork(static_cast<std::uint64_t>(step));
    Eigen::MatrixXd draws(n, n_samples);
    for (int i = 0; i < n; ++i) {
      Rng node_rng = step_rng.fork(static_cast<std::uint64_t>(i));
      for (int k = 0; k < n_samples; ++k)
        draws(i, k) = forecast.mu(i, step) +
                      forecast.sigma(i, step) * node_rng.normal();
    }
    out.steps.push_back(std::move(draws));
  }
  return out;
}

SampleForecast arrange_forecast(const GaussianForecast& forecast,
                                Arrangement arrangement, int n_samples,
                                std::uint64_t seed) {
  SampleForecast out = draw_marginal_samples(forecast, n_samples, seed);
  if (arrangement == Arrangement::Stack) return out;
  Rng rng(mix_seed(seed ^ 0x9e3779b97f4a7c15ULL));
  for (std::size_t step = 0; step < out.steps.size(); ++step) {
    if (arrangement == Arrangement::Rank) {
      sort_rows(out.steps[step]);
    } else {
      permute_rows(out.steps[step], rng.fork(step).seed());
    }
  }
  return out;
}

}  // namespace hiercast
