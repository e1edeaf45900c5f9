#include "hiercast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "hiercast/io.hpp"

namespace hiercast {

double crps_empirical(const Eigen::VectorXd& samples, double y) {
  const auto N = samples.size();
  if (N < 2) throw MetricsError("need at least 2 samples for crps");
  std::vector<double> x(samples.data(), samples.data() + N);
  std::sort(x.begin(), x.end());

  // mean |X - y| minus the pair term (1/N^2) sum_k (2k - N + 1) x_(k),
  // which equals 0.5 mean |X - X'| for sorted samples.
  double abs_term = 0.0, pair_term = 0.0;
  for (Eigen::Index k = 0; k < N; ++k) {
    abs_term += std::abs(x[static_cast<std::size_t>(k)] - y);
    pair_term += static_cast<double>(2 * k - N + 1) *
                 x[static_cast<std::size_t>(k)];
  }
  const double n = static_cast<double>(N);
  return abs_term / n - pair_term / (n * n);
}

double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) throw MetricsError("sigma must be positive");
  const double z = (y - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return sigma *
         (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

EvalReport evaluate(const SampleForecast& forecast, const SeriesPanel& actuals,
                    const HierarchySpec& hierarchy, const std::string& method) {
  const int n = hierarchy.node_count();
  const int h = forecast.horizon();
  if (forecast.node_count() != n)
    throw MetricsError("forecast nodes do not match the hierarchy");
  if (actuals.node_count() != n || actuals.length() != h)
    throw MetricsError("actuals are " + std::to_string(actuals.node_count()) +
                       "x" + std::to_string(actuals.length()) + ", expected " +
                       std::to_string(n) + "x" + std::to_string(h));
  if (actuals.node_ids != hierarchy.nodes())
    throw MetricsError("actuals rows are not in canonical hierarchy order");

  EvalReport report;
  report.method = method;
  report.node_ids = hierarchy.nodes();
  report.levels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    report.levels[static_cast<std::size_t>(i)] = hierarchy.level_of(i);

  report.crps.resize(n, h);
  for (int t = 0; t < h; ++t) {
    const Eigen::MatrixXd& step = forecast.steps[static_cast<std::size_t>(t)];
    for (int i = 0; i < n; ++i)
      report.crps(i, t) =
          crps_empirical(step.row(i).transpose(), actuals.values(i, t));
  }

  report.node_means = report.crps.rowwise().mean();
  report.level_means.assign(static_cast<std::size_t>(hierarchy.level_count()),
                            0.0);
  std::vector<int> level_sizes(static_cast<std::size_t>(hierarchy.level_count()),
                               0);
  for (int i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(hierarchy.level_of(i) - 1);
    report.level_means[l] += report.node_means[i];
    ++level_sizes[l];
  }
  for (std::size_t l = 0; l < report.level_means.size(); ++l)
    report.level_means[l] /= level_sizes[l];
  report.overall_mean = report.node_means.mean();
  return report;
}

namespace {

// Upper 5% studentized-range quantiles q(k, infinity), indexed by method
// count.
double critical_constant_for(int k) {
  static const std::map<int, double> table = {
      {2, 2.772},  {3, 3.314},  {4, 3.633},  {5, 3.858},  {6, 4.030},
      {7, 4.170},  {8, 4.286},  {9, 4.387},  {10, 4.474}, {11, 4.552},
      {12, 4.622}, {13, 4.685}, {14, 4.743}, {15, 4.796}, {16, 4.845},
      {17, 4.891}, {18, 4.934}, {19, 4.974}, {20, 5.012}};
  const auto it = table.find(k);
  if (it == table.end())
    throw MetricsError(
        "no built-in critical constant for " + std::to_string(k) +
        " methods; pass one explicitly");
  return it->second;
}

}  // namespace

McbResult mcb(const Eigen::MatrixXd& scores,
              const std::vector<std::string>& method_names,
              const McbOptions& options) {
  const int k = static_cast<int>(scores.rows());
  const int inst = static_cast<int>(scores.cols());
  if (k < 2 || inst < 2)
    throw MetricsError("mcb needs at least 2 methods and 2 instances");
  if (static_cast<int>(method_names.size()) != k)
    throw MetricsError("method name count does not match the score table");

  McbResult result;
  result.methods = method_names;
  result.average_rank = Eigen::VectorXd::Zero(k);

  std::vector<int> order(static_cast<std::size_t>(k));
  for (int c = 0; c < inst; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return scores(a, c) < scores(b, c);
    });
    // ties share the average of the rank positions they span
    int at = 0;
    while (at < k) {
      int end = at + 1;
      while (end < k &&
             scores(order[static_cast<std::size_t>(end)], c) ==
                 scores(order[static_cast<std::size_t>(at)], c))
        ++end;
      const double shared = 0.5 * static_cast<double>(at + end - 1) + 1.0;
      for (int p = at; p < end; ++p)
        result.average_rank[order[static_cast<std::size_t>(p)]] += shared;
      at = end;
    }
  }
  result.average_rank /= static_cast<double>(inst);

  const double q = options.critical_constant > 0.0
                       ? options.critical_constant
                       : critical_constant_for(k);
  result.half_width =
      q * std::sqrt(static_cast<double>(k) * (k + 1) / (12.0 * inst));

  result.overlap.resize(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      result.overlap(i, j) =
          std::abs(result.average_rank[i] - result.average_rank[j]) <=
          2.0 * result.half_width;
  return result;
}

std::string mcb_csv(const McbResult& result) {
  std::ostringstream out;
  out << "method,average_rank,lower,upper\n";
  for (std::size_t i = 0; i < result.methods.size(); ++i) {
    const double r = result.average_rank[static_cast<Eigen::Index>(i)];
    out << result.methods[i] << ',' << format_double(r) << ','
        << format_double(r - result.half_width) << ','
        << format_double(r + result.half_width) << '\n';
  }
  return out.str();
}

void write_mcb_svg(const McbResult& result, const std::string& path) {
  const int k = static_cast<int>(result.methods.size());
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (result.average_rank[a] != result.average_rank[b])
      return result.average_rank[a] < result.average_rank[b];
    return result.methods[static_cast<std::size_t>(a)] <
           result.methods[static_cast<std::size_t>(b)];
  });

  const double row_h = 26.0, top = 36.0, bottom = 34.0;
  const double left = 170.0, right = 40.0, width = 640.0;
  const double height = top + bottom + row_h * k;
  const double lo = result.average_rank.minCoeff() - result.half_width;
  const double hi = result.average_rank.maxCoeff() + result.half_width;
  const double pad = 0.05 * std::max(1e-9, hi - lo);
  const double x0 = lo - pad, x1 = hi + pad;
  auto x_of = [&](double rank) {
    return left + (rank - x0) / (x1 - x0) * (width - left - right);
  };
  // best method at the bottom
  auto y_of = [&](int pos) { return top + row_h * (k - 1 - pos) + row_h / 2; };

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << width << ' '
      << fmt(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // shaded band over the best method's interval
  const int best = order[0];
  const double band_l = x_of(result.average_rank[best] - result.half_width);
  const double band_r = x_of(result.average_rank[best] + result.half_width);
  svg << "<rect x=\"" << fmt(band_l) << "\" y=\"" << fmt(top) << "\" width=\""
      << fmt(band_r - band_l) << "\" height=\"" << fmt(row_h * k)
      << "\" fill=\"#dce9f7\"/>\n";

  for (int pos = 0; pos < k; ++pos) {
    const int i = order[static_cast<std::size_t>(pos)];
    const double y = y_of(pos);
    const double xl = x_of(result.average_rank[i] - result.half_width);
    const double xr = x_of(result.average_rank[i] + result.half_width);
    const double xc = x_of(result.average_rank[i]);
    svg << "<line x1=\"" << fmt(xl) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(xr) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#30507a\" stroke-width=\"2\"/>\n";
    for (double xe : {xl, xr})
      svg << "<line x1=\"" << fmt(xe) << "\" y1=\"" << fmt(y - 5) << "\" x2=\""
          << fmt(xe) << "\" y2=\"" << fmt(y + 5)
          << "\" stroke=\"#30507a\" stroke-width=\"2\"/>\n";
    svg << "<circle cx=\"" << fmt(xc) << "\" cy=\"" << fmt(y)
        << "\" r=\"4\" fill=\"#b03a2e\"/>\n";
    svg << "<text x=\"" << fmt(left - 10) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << result.methods[static_cast<std::size_t>(i)] << " ("
        << fmt(result.average_rank[i]) << ")</text>\n";
  }

  // rank axis with unit ticks
  const double axis_y = top + row_h * k + 12;
  svg << "<line x1=\"" << fmt(x_of(x0)) << "\" y1=\"" << fmt(axis_y)
      << "\" x2=\"" << fmt(x_of(x1)) << "\" y2=\"" << fmt(axis_y)
      << "\" stroke=\"black\"/>\n";
  for (int r = static_cast<int>(std::ceil(x0)); r <= static_cast<int>(std::floor(x1)); ++r) {
    svg << "<line x1=\"" << fmt(x_of(r)) << "\" y1=\"" << fmt(axis_y - 4)
        << "\" x2=\"" << fmt(x_of(r)) << "\" y2=\"" << fmt(axis_y + 4)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(x_of(r)) << "\" y=\"" << fmt(axis_y + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << r << "</text>\n";
  }
  svg << "<text x=\"" << fmt(left) << "\" y=\"20\" font-family=\"sans-serif\" "
         "font-size=\"13\">average rank (lower is better)</text>\n";
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace hiercast
