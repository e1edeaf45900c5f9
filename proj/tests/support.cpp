#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "hiercast/rng.hpp"

namespace testsupport {

using namespace hiercast;

HierarchySpec two_region_hierarchy() {
  return HierarchySpec::from_edges({{"total", ""},
                                    {"A", "total"},
                                    {"B", "total"},
                                    {"AA", "A"},
                                    {"AB", "A"},
                                    {"AC", "A"},
                                    {"BA", "B"},
                                    {"BB", "B"}});
}

HierarchySpec random_hierarchy(std::uint64_t seed, int max_depth,
                               int max_bottom) {
  Rng rng(mix_seed(seed ^ 0x72616e646f6d00ULL));
  std::vector<std::pair<std::string, std::string>> edges{{"r", ""}};
  int leaves = 1;

  struct Item {
    std::string id;
    int depth;
  };
  std::vector<Item> frontier{{"r", 1}};
  while (!frontier.empty()) {
    const Item item = frontier.back();
    frontier.pop_back();
    if (item.depth >= max_depth) continue;
    // the root always splits; deeper nodes split with probability 0.7
    if (item.depth > 1 && rng.uniform() >= 0.7) continue;
    int k = 2 + static_cast<int>(rng.integer(3));  // 2..4 children
    k = std::min(k, max_bottom - leaves + 1);
    if (k < 2) continue;
    leaves += k - 1;
    for (int c = 0; c < k; ++c) {
      const std::string child = item.id + "." + std::to_string(c);
      edges.emplace_back(child, item.id);
      frontier.push_back({child, item.depth + 1});
    }
  }
  return HierarchySpec::from_edges(edges);
}

namespace {

Eigen::VectorXd tie_ranks(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&v](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::VectorXd ranks(n);
  Eigen::Index at = 0;
  while (at < n) {
    Eigen::Index end = at;
    while (end + 1 < n && v[order[static_cast<std::size_t>(end + 1)]] ==
                              v[order[static_cast<std::size_t>(at)]])
      ++end;
    const double shared = 0.5 * static_cast<double>(at + end) + 1.0;
    for (Eigen::Index i = at; i <= end; ++i)
      ranks[order[static_cast<std::size_t>(i)]] = shared;
    at = end + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ra = tie_ranks(a);
  const Eigen::VectorXd rb = tie_ranks(b);
  const Eigen::VectorXd ca = ra.array() - ra.mean();
  const Eigen::VectorXd cb = rb.array() - rb.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

double crps_pairwise(const Eigen::VectorXd& samples, double y) {
  const Eigen::Index n = samples.size();
  double first = 0.0, second = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    first += std::abs(samples[i] - y);
    for (Eigen::Index j = 0; j < n; ++j)
      second += std::abs(samples[i] - samples[j]);
  }
  return first / static_cast<double>(n) -
         second / (2.0 * static_cast<double>(n) * static_cast<double>(n));
}

double crps_gaussian_numeric(double mu, double sigma, double y) {
  const double lo = std::min(mu - 12.0 * sigma, y - 12.0 * sigma);
  const double hi = std::max(mu + 12.0 * sigma, y + 12.0 * sigma);
  const int steps = 200000;
  const double dt = (hi - lo) / steps;
  auto integrand = [&](double t) {
    const double z = (t - mu) / sigma;
    const double F = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double step = t >= y ? 1.0 : 0.0;
    const double d = F - step;
    return d * d;
  };
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i < steps; ++i) acc += integrand(lo + i * dt);
  return acc * dt;
}

Eigen::VectorXd average_ranks_oracle(const Eigen::MatrixXd& scores) {
  const Eigen::Index k = scores.rows();
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(k);
  for (Eigen::Index inst = 0; inst < scores.cols(); ++inst) {
    for (Eigen::Index m = 0; m < k; ++m) {
      double rank = 1.0;
      for (Eigen::Index o = 0; o < k; ++o) {
        if (o == m) continue;
        if (scores(o, inst) < scores(m, inst)) rank += 1.0;
        if (scores(o, inst) == scores(m, inst)) rank += 0.5;
      }
      avg[m] += rank;
    }
  }
  return avg / static_cast<double>(scores.cols());
}

SeriesPanel small_panel(const HierarchySpec& hierarchy, int T,
                        std::uint64_t seed) {
  SyntheticParams params;
  params.ar = {{0.5}};
  params.level = {5.0};
  return generate_synthetic(hierarchy, T, seed, params);
}

std::string temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("hiercast_test_" + tag + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testsupport
