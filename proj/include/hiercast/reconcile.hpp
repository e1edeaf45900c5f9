#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "hiercast/forecast_types.hpp"
#include "hiercast/hierarchy.hpp"
#include "hiercast/panel.hpp"

namespace hiercast {

struct ReconcileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ReconcileMethod { Bu, Td, Mint };
enum class CovarianceAssumption { None, Struct, OlsIdentity };

std::string to_string(ReconcileMethod method);
std::string to_string(CovarianceAssumption assumption);
ReconcileMethod reconcile_method_from_string(const std::string& name);
CovarianceAssumption covariance_from_string(const std::string& name);

// Linear map P taking an incoherent vector of all n series down to m bottom
// values; reconciliation is then y_tilde = S * P * y_hat.
struct ReconciliationMap {
  Eigen::MatrixXd P;  // m x n
  ReconcileMethod method = ReconcileMethod::Bu;
  CovarianceAssumption covariance = CovarianceAssumption::None;
};

// Selector of the bottom rows.
ReconciliationMap build_bu(const SummingMatrix& S);

// Distributes the root forecast over the bottom nodes using each bottom
// series' average historical share of the root. The panel passed in is the
// training history; the root series must be strictly positive throughout.
ReconciliationMap build_td(const SummingMatrix& S, const SeriesPanel& panel);

// Trace-minimizing map P = (S' W^-1 S)^-1 S' W^-1 with W = diag(S*1) under
// the structural assumption, or W = I for the identity variant.
ReconciliationMap build_mint(const SummingMatrix& S,
                             CovarianceAssumption assumption);

// S * P * y_hat.
Eigen::VectorXd reconcile_point(const ReconciliationMap& map,
                                const SummingMatrix& S,
                                const Eigen::VectorXd& y_hat);

// Applies the map to every sample column of every step.
SampleForecast reconcile_samples(const ReconciliationMap& map,
                                 const SummingMatrix& S,
                                 const SampleForecast& samples);

}  // namespace hiercast
