#include "hiercast/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace hiercast {

std::string to_string(ForecasterKind kind) {
  switch (kind) {
    case ForecasterKind::Ar: return "ar";
    case ForecasterKind::Ses: return "ses";
    case ForecasterKind::Holt: return "holt";
  }
  return "?";
}

ForecasterKind forecaster_kind_from_string(const std::string& name) {
  if (name == "ar") return ForecasterKind::Ar;
  if (name == "ses") return ForecasterKind::Ses;
  if (name == "holt") return ForecasterKind::Holt;
  throw FitError("unknown forecaster kind '" + name + "'");
}

namespace {

double companion_spectral_radius(const std::vector<double>& phi) {
  const int p = static_cast<int>(phi.size());
  if (p == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) companion(0, i) = phi[i];
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const auto eigenvalues = companion.eigenvalues();
  double radius = 0.0;
  for (int i = 0; i < p; ++i) radius = std::max(radius, std::abs(eigenvalues[i]));
  return radius;
}

BaseForecaster fit_ses(const Eigen::VectorXd& y) {
  const int T = static_cast<int>(y.size());
  double best_alpha = 0.05, best_sse = std::numeric_limits<double>::infinity();
  for (int g = 1; g <= 19; ++g) {
    const double alpha = 0.05 * g;
    double level = y[0], sse = 0.0;
    for (int t = 1; t < T; ++t) {
      const double e = y[t] - level;
      sse += e * e;
      level = alpha * y[t] + (1.0 - alpha) * level;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_alpha = alpha;
    }
  }
  BaseForecaster f;
  f.kind = ForecasterKind::Ses;
  f.alpha = best_alpha;
  double level = y[0];
  for (int t = 1; t < T; ++t) level = best_alpha * y[t] + (1.0 - best_alpha) * level;
  f.level = level;
  f.residual_variance = best_sse / std::max(1, T - 1);
  f.fitted = true;
  return f;
}

BaseForecaster fit_holt(const Eigen::VectorXd& y) {
  const int T = static_cast<int>(y.size());
  double best_alpha = 0.05, best_beta = 0.05;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int ga = 1; ga <= 19; ++ga) {
    for (int gb = 1; gb <= 19; ++gb) {
      const double alpha = 0.05 * ga, beta = 0.05 * gb;
      double level = y[0], trend = y[1] - y[0], sse = 0.0;
      for (int t = 1; t < T; ++t) {
        const double e = y[t] - (level + trend);
        sse += e * e;
        const double new_level = alpha * y[t] + (1.0 - alpha) * (level + trend);
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        level = new_level;
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_alpha = alpha;
        best_beta = beta;
      }
    }
  }
  BaseForecaster f;
  f.kind = ForecasterKind::Holt;
  f.alpha = best_alpha;
  f.beta = best_beta;
  double level = y[0], trend = y[1] - y[0];
  for (int t = 1; t < T; ++t) {
    const double new_level = best_alpha * y[t] + (1.0 - best_alpha) * (level + trend);
    trend = best_beta * (new_level - level) + (1.0 - best_beta) * trend;
    level = new_level;
  }
  f.level = level;
  f.trend = trend;
  f.residual_variance = best_sse / std::max(1, T - 1);
  f.fitted = true;
  return f;
}

BaseForecaster fit_ar(const Eigen::VectorXd& y, int p) {
  const int T = static_cast<int>(y.size());
  const double mean = y.mean();
  const Eigen::VectorXd z = y.array() - mean;

  const int rows = T - p;
  Eigen::MatrixXd X(rows, p);
  Eigen::VectorXd target(rows);
  for (int t = p; t < T; ++t) {
    target[t - p] = z[t];
    for (int k = 0; k < p; ++k) X(t - p, k) = z[t - 1 - k];
  }
  // minimum-norm least squares; an exactly-constant series yields phi = 0
  const Eigen::VectorXd phi = X.completeOrthogonalDecomposition().solve(target);

  std::vector<double> coeffs(phi.data(), phi.data() + p);
  if (companion_spectral_radius(coeffs) >= 1.0) {
    BaseForecaster f = fit_ses(y);
    f.note = "ar fit non-stationary (spectral radius >= 1); fell back to ses";
    return f;
  }

  BaseForecaster f;
  f.kind = ForecasterKind::Ar;
  f.coefficients = std::move(coeffs);
  f.intercept = mean * (1.0 - phi.sum());
  const Eigen::VectorXd residuals = target - X * phi;
  f.residual_variance =
      residuals.squaredNorm() / std::max(1, rows - p - 1);
  f.tail.resize(p);
  for (int k = 0; k < p; ++k) f.tail[k] = y[T - p + k];
  f.fitted = true;
  return f;
}

}  // namespace

BaseForecaster fit_forecaster(const Eigen::VectorXd& series, ForecasterKind kind,
                              int order) {
  const int T = static_cast<int>(series.size());
  const int min_len =
      std::max(kind == ForecasterKind::Ar ? order + 2 : 2, 10);
  if (T < min_len)
    throw FitError("series too short: " + std::to_string(T) + " < " +
                   std::to_string(min_len));
  switch (kind) {
    case ForecasterKind::Ar:
      if (order < 1) throw FitError("ar order must be >= 1");
      return fit_ar(series, order);
    case ForecasterKind::Ses:
      return fit_ses(series);
    case ForecasterKind::Holt:
      return fit_holt(series);
  }
  throw FitError("unknown forecaster kind");
}

GaussianForecast forecast_gaussian(const BaseForecaster& f, int h) {
  if (!f.fitted) throw FitError("forecaster not fitted");
  if (h < 0) throw FitError("negative horizon");
  GaussianForecast out;
  out.mu.resize(1, h);
  out.sigma.resize(1, h);
  if (h == 0) return out;

  const double s2 = std::max(0.0, f.residual_variance);
  if (f.kind == ForecasterKind::Ar) {
    const int p = static_cast<int>(f.coefficients.size());
    std::vector<double> history = f.tail;  // most recent last
    // psi weights of the implied moving-average expansion
    std::vector<double> psi(static_cast<std::size_t>(h), 0.0);
    psi[0] = 1.0;
    for (int j = 1; j < h; ++j) {
      double acc = 0.0;
      for (int i = 1; i <= std::min(j, p); ++i)
        acc += f.coefficients[i - 1] * psi[j - i];
      psi[j] = acc;
    }
    double var_acc = 0.0;
    for (int k = 0; k < h; ++k) {
      double mu = f.intercept;
      for (int i = 0; i < p; ++i)
        mu += f.coefficients[i] * history[history.size() - 1 - i];
      history.push_back(mu);
      var_acc += psi[k] * psi[k];
      out.mu(0, k) = mu;
      out.sigma(0, k) = std::max(1e-9, std::sqrt(s2 * var_acc));
    }
  } else if (f.kind == ForecasterKind::Ses) {
    for (int k = 0; k < h; ++k) {
      out.mu(0, k) = f.level;
      const double var = s2 * (1.0 + k * f.alpha * f.alpha);
      out.sigma(0, k) = std::max(1e-9, std::sqrt(var));
    }
  } else {
    // Holt: error propagation with smoothing gain alpha and trend gain
    // alpha * beta per elapsed step
    double gain_sq = 0.0;
    for (int k = 0; k < h; ++k) {
      out.mu(0, k) = f.level + (k + 1) * f.trend;
      if (k > 0) {
        const double g = f.alpha * (1.0 + f.beta * k);
        gain_sq += g * g;
      }
      const double var = s2 * (1.0 + gain_sq);
      out.sigma(0, k) = std::max(1e-9, std::sqrt(var));
    }
  }
  return out;
}

}  // namespace hiercast
