#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hiercast/forecast_types.hpp"

namespace hiercast {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ForecasterKind { Ar, Ses, Holt };

std::string to_string(ForecasterKind kind);
ForecasterKind forecaster_kind_from_string(const std::string& name);

// A fitted univariate probabilistic forecaster with Gaussian step-ahead
// errors. AR(p) is fit by least squares on the mean-centered lag regression;
// SES and Holt pick smoothing weights by grid search on in-sample one-step
// squared error. An AR fit that comes out non-stationary falls back to SES
// and records that in `note`.
struct BaseForecaster {
  ForecasterKind kind = ForecasterKind::Ses;

  // AR state
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<double> tail;  // last p observations, most recent last

  // smoothing state
  double alpha = 0.0;
  double beta = 0.0;
  double level = 0.0;
  double trend = 0.0;

  double residual_variance = 0.0;
  bool fitted = false;
  std::string note;  // fit report, e.g. the AR -> SES fallback
};

// order is the AR lag count; ignored for SES/Holt. Requires
// series.size() >= max(order + 2, 10).
BaseForecaster fit_forecaster(const Eigen::VectorXd& series, ForecasterKind kind,
                              int order = 4);

// h-step Gaussian forecast: means by iterated recursion, variances by
// step-ahead error propagation for the fitted recursion. Returned sigma is
// floored at 1e-9. h = 0 yields an empty forecast.
GaussianForecast forecast_gaussian(const BaseForecaster& f, int h);

}  // namespace hiercast
