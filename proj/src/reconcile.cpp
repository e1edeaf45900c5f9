#include "hiercast/reconcile.hpp"

namespace hiercast {

std::string to_string(ReconcileMethod method) {
  switch (method) {
    case ReconcileMethod::Bu: return "bu";
    case ReconcileMethod::Td: return "td";
    case ReconcileMethod::Mint: return "mint";
  }
  return "?";
}

std::string to_string(CovarianceAssumption assumption) {
  switch (assumption) {
    case CovarianceAssumption::None: return "none";
    case CovarianceAssumption::Struct: return "struct";
    case CovarianceAssumption::OlsIdentity: return "ols";
  }
  return "?";
}

ReconcileMethod reconcile_method_from_string(const std::string& name) {
  if (name == "bu") return ReconcileMethod::Bu;
  if (name == "td") return ReconcileMethod::Td;
  if (name == "mint") return ReconcileMethod::Mint;
  throw ReconcileError("unknown reconciliation method '" + name + "'");
}

CovarianceAssumption covariance_from_string(const std::string& name) {
  if (name == "none") return CovarianceAssumption::None;
  if (name == "struct") return CovarianceAssumption::Struct;
  if (name == "ols") return CovarianceAssumption::OlsIdentity;
  throw ReconcileError("unknown covariance assumption '" + name + "'");
}

ReconciliationMap build_bu(const SummingMatrix& S) {
  ReconciliationMap map;
  map.method = ReconcileMethod::Bu;
  map.P = Eigen::MatrixXd::Zero(S.m, S.n);
  for (int j = 0; j < S.m; ++j) map.P(j, S.bottom_rows[j]) = 1.0;
  return map;
}

ReconciliationMap build_td(const SummingMatrix& S, const SeriesPanel& panel) {
  if (panel.values.rows() != S.n)
    throw ReconcileError("panel has " + std::to_string(panel.values.rows()) +
                         " series, summing matrix expects " +
                         std::to_string(S.n));
  const auto T = panel.values.cols();
  if (T == 0) throw ReconcileError("empty history");

  Eigen::VectorXd proportions = Eigen::VectorXd::Zero(S.m);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double root = panel.values(0, t);
    if (root <= 0.0)
      throw ReconcileError(
          "root series not strictly positive at timestamp " +
          panel.timestamps[static_cast<std::size_t>(t)] +
          "; top-down proportions undefined");
    for (int j = 0; j < S.m; ++j)
      proportions[j] += panel.values(S.bottom_rows[j], t) / root;
  }
  proportions /= static_cast<double>(T);
  const double total = proportions.sum();
  if (total <= 0.0)
    throw ReconcileError("top-down proportions sum to zero");
  proportions /= total;

  ReconciliationMap map;
  map.method = ReconcileMethod::Td;
  map.P = Eigen::MatrixXd::Zero(S.m, S.n);
  map.P.col(0) = proportions;
  return map;
}

ReconciliationMap build_mint(const SummingMatrix& S,
                             CovarianceAssumption assumption) {
  if (assumption == CovarianceAssumption::None)
    throw ReconcileError("mint needs a covariance assumption");

  // W^-1 S with W = diag(S*1) (structural) or W = I.
  Eigen::MatrixXd Winv_S = S.entries;
  if (assumption == CovarianceAssumption::Struct) {
    const Eigen::VectorXd row_sums = S.entries.rowwise().sum();
    Winv_S.array().colwise() /= row_sums.array();
  }
  const Eigen::MatrixXd normal = S.entries.transpose() * Winv_S;
  const Eigen::LDLT<Eigen::MatrixXd> solver(normal);
  if (solver.info() != Eigen::Success)
    throw ReconcileError("mint normal matrix is singular");

  ReconciliationMap map;
  map.method = ReconcileMethod::Mint;
  map.covariance = assumption;
  map.P = solver.solve(Winv_S.transpose());

  const double defect =
      (map.P * S.entries - Eigen::MatrixXd::Identity(S.m, S.m))
          .cwiseAbs()
          .maxCoeff();
  if (defect > 1e-8)
    throw ReconcileError("mint normal matrix is singular (P*S defect " +
                         std::to_string(defect) + ")");
  return map;
}

Eigen::VectorXd reconcile_point(const ReconciliationMap& map,
                                const SummingMatrix& S,
                                const Eigen::VectorXd& y_hat) {
  if (map.P.rows() != S.m || map.P.cols() != S.n)
    throw ReconcileError("map shape does not match the summing matrix");
  if (y_hat.size() != S.n)
    throw ReconcileError("forecast vector has length " +
                         std::to_string(y_hat.size()) + ", expected " +
                         std::to_string(S.n));
  return S.entries * (map.P * y_hat);
}

SampleForecast reconcile_samples(const ReconciliationMap& map,
                                 const SummingMatrix& S,
                                 const SampleForecast& samples) {
  if (map.P.rows() != S.m || map.P.cols() != S.n)
    throw ReconcileError("map shape does not match the summing matrix");
  SampleForecast out;
  out.sample_count = samples.sample_count;
  out.seed = samples.seed;
  const Eigen::MatrixXd SP = S.entries * map.P;
  for (const auto& step : samples.steps) {
    if (step.rows() != S.n)
      throw ReconcileError("sample matrix has " + std::to_string(step.rows()) +
                           " rows, expected " + std::to_string(S.n));
    out.steps.push_back(SP * step);
  }
  return out;
}

}  // namespace hiercast
