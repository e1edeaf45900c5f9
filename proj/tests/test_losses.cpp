#include <doctest/doctest.h>

#include <cmath>

#include "hiercast/losses.hpp"
#include "hiercast/rng.hpp"
#include "support.hpp"

using namespace hiercast;
using testsupport::two_region_hierarchy;

namespace {

using DParam = GaussianParam<double>;
using Outputs = std::vector<std::vector<DParam>>;

Outputs constant_outputs(int n, int steps, double mu, double sigma) {
  return Outputs(static_cast<std::size_t>(n),
                 std::vector<DParam>(static_cast<std::size_t>(steps),
                                     DParam{mu, sigma}));
}

std::vector<double> draw_noise(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> z(count);
  for (auto& v : z) v = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("kl mode names round trip") {
  CHECK(kl_mode_from_string(to_string(KlMode::ClosedForm)) ==
        KlMode::ClosedForm);
  CHECK(kl_mode_from_string(to_string(KlMode::Sampled)) == KlMode::Sampled);
  CHECK_THROWS_AS(kl_mode_from_string("exact"), LossError);
}

TEST_CASE("negative log likelihood matches the hand formula") {
  Outputs outputs{{DParam{1.0, 2.0}, DParam{0.0, 0.5}}, {DParam{-1.0, 1.0}, DParam{3.0, 4.0}}};
  Eigen::MatrixXd y(2, 2);
  y << 1.5, -0.25, -1.0, 7.0;
  double expected = 0.0;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::acos(-1.0));
  const double mus[] = {1.0, 0.0, -1.0, 3.0};
  const double sigmas[] = {2.0, 0.5, 1.0, 4.0};
  const double obs[] = {1.5, -0.25, -1.0, 7.0};
  for (int i = 0; i < 4; ++i) {
    const double z = (obs[i] - mus[i]) / sigmas[i];
    expected += half_log_2pi + std::log(sigmas[i]) + 0.5 * z * z;
  }
  CHECK(nll_loss(outputs, y) == doctest::Approx(expected).epsilon(1e-12));

  outputs[0][0].sigma = 0.0;
  CHECK_THROWS_AS(nll_loss(outputs, y), LossError);
  outputs[0][0].sigma = 2.0;
  outputs[0][0].mu = std::nan("");
  CHECK_THROWS_AS(nll_loss(outputs, y), LossError);
  Eigen::MatrixXd wrong(3, 2);
  CHECK_THROWS_AS(nll_loss(constant_outputs(2, 2, 0.0, 1.0), wrong),
                  LossError);
}

TEST_CASE("gaussian kl closed form") {
  CHECK(kl_gaussian(DParam{0.7, 1.3}, DParam{0.7, 1.3}) ==
        doctest::Approx(0.0).epsilon(1e-14));
  // KL(N(0,1) || N(1,4)) = 0.5 (1/4 + 1/4 - 1 + ln 4)
  const double expected = 0.5 * (0.25 + 0.25 - 1.0 + std::log(4.0));
  CHECK(kl_gaussian(DParam{0.0, 1.0}, DParam{1.0, 2.0}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_gaussian(DParam{0.0, 1.0}, DParam{1.0, 2.0}) !=
        doctest::Approx(kl_gaussian(DParam{1.0, 2.0}, DParam{0.0, 1.0})));
  CHECK_THROWS_AS(kl_gaussian(DParam{0.0, -1.0}, DParam{0.0, 1.0}),
                  LossError);
}

TEST_CASE("symmetric kl against the analytic child sum") {
  const DParam parent{2.0, 1.5};
  const std::vector<DParam> children{{0.5, 1.0}, {1.0, 0.5}};
  const DParam sum{1.5, std::sqrt(1.25)};
  const double expected =
      0.5 * (kl_gaussian(parent, sum) + kl_gaussian(sum, parent));
  CHECK(kl_gaussian_symmetric(parent, children) ==
        doctest::Approx(expected).epsilon(1e-12));
  // exact match makes the penalty vanish
  const std::vector<DParam> exact{{1.0, 0.9}, {1.0, std::sqrt(1.5 * 1.5 - 0.81)}};
  CHECK(kl_gaussian_symmetric(DParam{2.0, 1.5}, exact) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(kl_gaussian_symmetric(parent, {}), LossError);
}

TEST_CASE("sampled kl approaches the closed form") {
  const DParam parent{1.0, 1.2};
  const std::vector<DParam> children{{0.4, 0.8}, {0.7, 0.6}};
  const double closed = kl_gaussian_symmetric(parent, children);
  const int n_kl = 20000;
  const auto noise = draw_noise((1 + children.size()) * n_kl, 11);
  const double sampled =
      kl_sampled_symmetric(parent, children, n_kl, noise, 0);
  CHECK(std::abs(sampled - closed) < 0.02);

  CHECK_THROWS_AS(kl_sampled_symmetric(parent, children, 1, noise, 0),
                  LossError);
  CHECK_THROWS_AS(
      kl_sampled_symmetric(parent, children, n_kl, noise, noise.size()),
      LossError);
}

TEST_CASE("sampled kl uses unbiased moment fits") {
  // two draws per set: mean and sample variance with the n-1 divisor
  const DParam parent{0.0, 1.0};
  const std::vector<DParam> children{{0.0, 1.0}};
  const std::vector<double> noise{1.0, -1.0, 0.5, -0.5};
  // parent draws {1,-1}: fit N(0, sqrt(2)); child-sum draws {0.5,-0.5}:
  // fit N(0, sqrt(0.5))
  const DParam pf{0.0, std::sqrt(2.0)};
  const DParam sf{0.0, std::sqrt(0.5)};
  const double expected = 0.5 * (kl_gaussian(pf, sf) + kl_gaussian(sf, pf));
  CHECK(kl_sampled_symmetric(parent, children, 2, noise, 0) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("total loss reduces to the likelihood at lambda zero") {
  const HierarchySpec h = two_region_hierarchy();
  const Outputs outputs = constant_outputs(h.node_count(), 2, 1.0, 1.0);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(h.node_count(), 2, 1.3);
  const Eigen::VectorXd scale = Eigen::VectorXd::Ones(h.node_count());
  const double nll = nll_loss(outputs, y);
  const std::vector<double> no_noise;
  CHECK(total_loss(outputs, y, h, scale, 0.0, KlMode::ClosedForm, 0,
                   no_noise) == nll);
  CHECK(total_loss(outputs, y, h, scale, 0.0, KlMode::Sampled, 0, no_noise) ==
        nll);
}

TEST_CASE("total loss adds the per-edge penalty") {
  const HierarchySpec h = two_region_hierarchy();
  Outputs outputs = constant_outputs(h.node_count(), 1, 0.0, 1.0);
  // make every parent exactly the sum of its children so the penalty is zero
  const int iA = h.index_of("A"), iB = h.index_of("B"),
            iT = h.index_of("total");
  for (int i : {h.index_of("AA"), h.index_of("AB"), h.index_of("AC"),
                h.index_of("BA"), h.index_of("BB")})
    outputs[static_cast<std::size_t>(i)][0] = DParam{2.0, 1.0};
  outputs[static_cast<std::size_t>(iA)][0] = DParam{6.0, std::sqrt(3.0)};
  outputs[static_cast<std::size_t>(iB)][0] = DParam{4.0, std::sqrt(2.0)};
  outputs[static_cast<std::size_t>(iT)][0] = DParam{10.0, std::sqrt(5.0)};
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(h.node_count(), 1, 2.0);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(h.node_count());
  const std::vector<double> no_noise;

  const double base = nll_loss(outputs, y);
  CHECK(total_loss(outputs, y, h, ones, 2.0, KlMode::ClosedForm, 0,
                   no_noise) == doctest::Approx(base).epsilon(1e-12));

  // break one edge and the weighted penalty appears
  outputs[static_cast<std::size_t>(iB)][0] = DParam{9.0, std::sqrt(2.0)};
  const double kl_b = kl_gaussian_symmetric(
      outputs[static_cast<std::size_t>(iB)][0],
      {DParam{2.0, 1.0}, DParam{2.0, 1.0}});
  const double kl_t = kl_gaussian_symmetric(
      outputs[static_cast<std::size_t>(iT)][0],
      {outputs[static_cast<std::size_t>(iA)][0],
       outputs[static_cast<std::size_t>(iB)][0]});
  const double with_pen = total_loss(outputs, y, h, ones, 2.0,
                                     KlMode::ClosedForm, 0, no_noise);
  CHECK(with_pen == doctest::Approx(nll_loss(outputs, y) +
                                    2.0 * (kl_b + kl_t))
                        .epsilon(1e-12));
}

TEST_CASE("total loss rescales children into the parent's units") {
  const HierarchySpec h = HierarchySpec::from_edges(
      {{"r", ""}, {"a", "r"}, {"b", "r"}});
  // scaled-space parameters all N(1, 1); scales r: 4, a: 2, b: 2 mean the
  // children sum to N(1, sqrt(2)/4 * 4) in the parent's units
  Outputs outputs = constant_outputs(3, 1, 1.0, 1.0);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(3, 1, 1.0);
  Eigen::VectorXd scale(3);
  scale << 4.0, 2.0, 2.0;
  const std::vector<double> no_noise;
  const DParam parent{1.0, 1.0};
  const std::vector<DParam> rescaled{{0.5, 0.5}, {0.5, 0.5}};
  const double expected = nll_loss(outputs, y) +
                          kl_gaussian_symmetric(parent, rescaled);
  CHECK(total_loss(outputs, y, h, scale, 1.0, KlMode::ClosedForm, 0,
                   no_noise) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampled total loss consumes the noise buffer edge by edge") {
  const HierarchySpec h = two_region_hierarchy();
  const Outputs outputs = constant_outputs(h.node_count(), 2, 1.0, 0.8);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(h.node_count(), 2, 1.0);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(h.node_count());
  const int n_kl = 8;
  const std::size_t need = kl_noise_size(h, n_kl, 2);
  // edges: total(2 children), A(3), B(2) -> (3 + 4 + 3) * n_kl per step
  CHECK(need == static_cast<std::size_t>((3 + 4 + 3) * n_kl * 2));
  const auto noise = draw_noise(need, 3);
  const double a =
      total_loss(outputs, y, h, ones, 0.5, KlMode::Sampled, n_kl, noise);
  CHECK(std::isfinite(a));
  // short buffer is rejected
  const auto shorter = draw_noise(need - 1, 3);
  CHECK_THROWS_AS(total_loss(outputs, y, h, ones, 0.5, KlMode::Sampled, n_kl,
                             shorter),
                  LossError);
}

TEST_CASE("loss gradients flow through the tape") {
  const HierarchySpec h = HierarchySpec::from_edges(
      {{"r", ""}, {"a", "r"}, {"b", "r"}});
  Eigen::MatrixXd y(3, 1);
  y << 3.0, 1.0, 1.5;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
  const std::vector<double> no_noise;

  const std::vector<double> at{2.8, 0.3, 1.1, -0.2, 1.4, 0.1};
  auto loss_at = [&](const std::vector<double>& p) {
    Outputs outputs(3, std::vector<DParam>(1));
    for (int i = 0; i < 3; ++i)
      outputs[static_cast<std::size_t>(i)][0] =
          DParam{p[static_cast<std::size_t>(2 * i)],
                 softplus(p[static_cast<std::size_t>(2 * i + 1)]) + 1e-6};
    return total_loss(outputs, y, h, ones, 0.7, KlMode::ClosedForm, 0,
                      no_noise);
  };

  Tape tape;
  std::vector<Var> vars;
  for (double v : at) vars.emplace_back(tape, v);
  std::vector<std::vector<GaussianParam<Var>>> outputs(
      3, std::vector<GaussianParam<Var>>(1));
  for (int i = 0; i < 3; ++i)
    outputs[static_cast<std::size_t>(i)][0] = GaussianParam<Var>{
        vars[static_cast<std::size_t>(2 * i)],
        softplus(vars[static_cast<std::size_t>(2 * i + 1)]) + 1e-6};
  const Var loss = total_loss(outputs, y, h, ones, 0.7, KlMode::ClosedForm, 0,
                              no_noise);
  backward(loss);
  CHECK(value_of(loss) == doctest::Approx(loss_at(at)).epsilon(1e-12));

  for (std::size_t i = 0; i < at.size(); ++i) {
    auto shifted = at;
    const double hstep = 1e-6;
    shifted[i] += hstep;
    const double up = loss_at(shifted);
    shifted[i] -= 2 * hstep;
    const double down = loss_at(shifted);
    const double fd = (up - down) / (2 * hstep);
    CHECK(vars[i].adjoint() == doctest::Approx(fd).epsilon(1e-4));
  }
}
