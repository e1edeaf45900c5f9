#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>

#include "hiercast/io.hpp"
#include "hiercast/metrics.hpp"
#include "hiercast/rng.hpp"
#include "support.hpp"

using namespace hiercast;
using testsupport::two_region_hierarchy;

TEST_CASE("empirical crps equals the pairwise oracle") {
  Rng rng(13);
  for (int rep = 0; rep < 25; ++rep) {
    const int N = 3 + static_cast<int>(rng.integer(40));
    Eigen::VectorXd samples(N);
    for (int k = 0; k < N; ++k) samples[k] = 2.0 * rng.normal();
    const double y = rng.normal();
    CHECK(crps_empirical(samples, y) ==
          doctest::Approx(testsupport::crps_pairwise(samples, y))
              .epsilon(1e-10));
  }
}

TEST_CASE("the two-sample hand case is exact") {
  Eigen::VectorXd samples(2);
  samples << 0.0, 2.0;
  CHECK(crps_empirical(samples, 1.0) == 0.5);
  Eigen::VectorXd one(1);
  CHECK_THROWS_AS(crps_empirical(one, 0.0), MetricsError);
}

TEST_CASE("crps is invariant to sample order and handles duplicates") {
  Eigen::VectorXd a(5), b(5);
  a << 3, 1, 1, -2, 0;
  b << -2, 0, 1, 1, 3;
  CHECK(crps_empirical(a, 0.4) == doctest::Approx(crps_empirical(b, 0.4)));
  Eigen::VectorXd same = Eigen::VectorXd::Constant(4, 2.5);
  CHECK(crps_empirical(same, 2.5) == doctest::Approx(0.0));
  CHECK(crps_empirical(same, 4.0) == doctest::Approx(1.5));
}

TEST_CASE("gaussian crps matches numeric integration") {
  for (auto [mu, sigma, y] : {std::tuple{0.0, 1.0, 0.0},
                              std::tuple{0.0, 1.0, 1.7},
                              std::tuple{3.0, 0.25, 2.0},
                              std::tuple{-5.0, 4.0, 10.0}}) {
    CHECK(crps_gaussian(mu, sigma, y) ==
          doctest::Approx(testsupport::crps_gaussian_numeric(mu, sigma, y))
              .epsilon(1e-4));
  }
  CHECK_THROWS_AS(crps_gaussian(0.0, 0.0, 1.0), MetricsError);
}

TEST_CASE("empirical crps converges to the gaussian closed form") {
  Rng rng(77);
  const double mu = 1.0, sigma = 2.0, y = 1.8;
  const int N = 100000;
  Eigen::VectorXd samples(N);
  for (int k = 0; k < N; ++k) samples[k] = mu + sigma * rng.normal();
  const double closed = crps_gaussian(mu, sigma, y);
  CHECK(std::abs(crps_empirical(samples, y) - closed) / closed < 0.005);
}

TEST_CASE("evaluation aggregates per node, level, and overall") {
  const HierarchySpec h = two_region_hierarchy();
  SampleForecast sf;
  sf.sample_count = 2;
  for (int t = 0; t < 2; ++t) {
    Eigen::MatrixXd step(8, 2);
    for (int i = 0; i < 8; ++i) {
      step(i, 0) = 0.0;
      step(i, 1) = 2.0;
    }
    sf.steps.push_back(step);
  }
  SeriesPanel actuals;
  actuals.node_ids = h.nodes();
  actuals.timestamps = {"t0", "t1"};
  actuals.values = Eigen::MatrixXd::Ones(8, 2);  // every crps is 0.5

  const EvalReport report = evaluate(sf, actuals, h, "demo");
  CHECK(report.method == "demo");
  CHECK(report.node_ids == h.nodes());
  CHECK(report.levels == std::vector<int>{1, 2, 2, 3, 3, 3, 3, 3});
  CHECK(report.crps.rows() == 8);
  CHECK(report.crps.cols() == 2);
  CHECK((report.crps.array() == 0.5).all());
  CHECK(report.node_means == Eigen::VectorXd::Constant(8, 0.5));
  REQUIRE(report.level_means.size() == 3);
  for (double v : report.level_means) CHECK(v == doctest::Approx(0.5));
  CHECK(report.overall_mean == doctest::Approx(0.5));

  SeriesPanel wrong = actuals;
  wrong.values = Eigen::MatrixXd::Ones(8, 3);
  wrong.timestamps = {"t0", "t1", "t2"};
  CHECK_THROWS_AS(evaluate(sf, wrong, h), MetricsError);
  SeriesPanel renamed = actuals;
  renamed.node_ids[2] = "ghost";
  CHECK_THROWS_AS(evaluate(sf, renamed, h), MetricsError);
}

TEST_CASE("mcb ranks match the brute-force oracle") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const int k = 3 + static_cast<int>(rng.integer(5));
    const int inst = 5 + static_cast<int>(rng.integer(20));
    Eigen::MatrixXd scores(k, inst);
    for (int m = 0; m < k; ++m)
      for (int i = 0; i < inst; ++i)
        scores(m, i) = rng.integer(6);  // integer scores force ties
    std::vector<std::string> names;
    for (int m = 0; m < k; ++m) names.push_back("m" + std::to_string(m));
    const McbResult result = mcb(scores, names);
    const Eigen::VectorXd oracle = testsupport::average_ranks_oracle(scores);
    CHECK((result.average_rank - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("identical methods share ranks and overlap") {
  Eigen::MatrixXd scores(3, 40);
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    const double v = rng.normal();
    scores(0, i) = v;
    scores(1, i) = v;
    scores(2, i) = v + 10.0;  // clearly worse
  }
  const McbResult result = mcb(scores, {"a", "b", "c"});
  CHECK(result.average_rank[0] == result.average_rank[1]);
  CHECK(result.average_rank[0] == doctest::Approx(1.5));
  CHECK(result.average_rank[2] == doctest::Approx(3.0));
  CHECK(result.overlap(0, 1));
  CHECK(result.overlap(0, 0));
  CHECK_FALSE(result.overlap(0, 2));
  CHECK(result.half_width > 0.0);
}

TEST_CASE("the interval width follows the stated formula") {
  Eigen::MatrixXd scores = Eigen::MatrixXd::Random(4, 25);
  McbOptions options;
  options.critical_constant = 3.0;
  const McbResult result = mcb(scores, {"a", "b", "c", "d"}, options);
  CHECK(result.half_width ==
        doctest::Approx(3.0 * std::sqrt(4.0 * 5.0 / (12.0 * 25.0))));
  // built-in table at k = 4
  const McbResult table = mcb(scores, {"a", "b", "c", "d"});
  CHECK(table.half_width ==
        doctest::Approx(3.633 * std::sqrt(4.0 * 5.0 / (12.0 * 25.0))));
}

TEST_CASE("mcb input validation") {
  Eigen::MatrixXd scores(2, 4);
  scores.setZero();
  CHECK_THROWS_AS(mcb(scores, {"a"}), MetricsError);        // name mismatch
  Eigen::MatrixXd one(1, 4);
  CHECK_THROWS_AS(mcb(one, {"a"}), MetricsError);           // need 2 methods
  Eigen::MatrixXd empty(2, 0);
  CHECK_THROWS_AS(mcb(empty, {"a", "b"}), MetricsError);    // need instances

  // beyond the built-in table a constant must be supplied
  const int k = 21;
  Eigen::MatrixXd big = Eigen::MatrixXd::Random(k, 5);
  std::vector<std::string> names;
  for (int m = 0; m < k; ++m) names.push_back("m" + std::to_string(m));
  CHECK_THROWS_AS(mcb(big, names), MetricsError);
  McbOptions options;
  options.critical_constant = 5.0;
  CHECK_NOTHROW(mcb(big, names, options));
}

TEST_CASE("mcb csv and svg are deterministic") {
  Eigen::MatrixXd scores(3, 6);
  scores << 1, 2, 1, 2, 1, 2,  //
      2, 1, 2, 1, 2, 1,        //
      3, 3, 3, 3, 3, 3;
  const McbResult result = mcb(scores, {"beta", "alpha", "gamma"});
  const std::string csv = mcb_csv(result);
  CHECK(csv.rfind("method,average_rank,lower,upper\n", 0) == 0);
  CHECK(csv.find("gamma") != std::string::npos);

  const std::string dir = testsupport::temp_dir("mcb");
  write_mcb_svg(result, dir + "/a.svg");
  write_mcb_svg(result, dir + "/b.svg");
  const std::string a = read_text_file(dir + "/a.svg");
  CHECK(a == read_text_file(dir + "/b.svg"));
  CHECK(a.find("<svg") != std::string::npos);
  CHECK(a.find("average rank") != std::string::npos);
  std::filesystem::remove_all(dir);
}
