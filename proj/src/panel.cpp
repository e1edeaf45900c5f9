#include "hiercast/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "hiercast/io.hpp"
#include "hiercast/rng.hpp"

namespace hiercast {

SeriesPanel SeriesPanel::slice(int start, int len) const {
  if (start < 0 || len < 0 || start + len > length())
    throw DataError("panel slice [" + std::to_string(start) + ", " +
                    std::to_string(start + len) + ") out of range");
  SeriesPanel out;
  out.values = values.middleCols(start, len);
  out.timestamps.assign(timestamps.begin() + start,
                        timestamps.begin() + start + len);
  out.node_ids = node_ids;
  return out;
}

void SplitConfig::validate(int T) const {
  if (history_end < 1)
    throw DataError("split: conditioning range must hold at least one step");
  if (horizon < 1)
    throw DataError("split: prediction range must hold at least one step");
  if (history_end + horizon > T)
    throw DataError("split: history_end + horizon exceeds panel length " +
                    std::to_string(T));
}

SeriesPanel ingest_csv(const std::string& path, const HierarchySpec& spec,
                       IngestMode mode) {
  const auto table = read_csv_table(path);
  if (table.header.empty() || table.header[0] != "timestamp")
    throw DataError("ingest: first column must be 'timestamp'");
  if (table.rows.empty()) throw DataError("ingest: no rows in '" + path + "'");

  const auto& wanted = (mode == IngestMode::BottomOnly)
                           ? spec.bottom_indices()
                           : [&] {
                               std::vector<int> all(spec.node_count());
                               for (int i = 0; i < spec.node_count(); ++i) all[i] = i;
                               return all;
                             }();

  // map csv column -> canonical node index
  std::unordered_map<std::string, int> col_of_id;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& id = table.header[c];
    if (!spec.has_node(id))
      throw DataError("ingest: unknown node id '" + id + "'");
    if (col_of_id.count(id))
      throw DataError("ingest: duplicate column '" + id + "'");
    col_of_id[id] = static_cast<int>(c);
  }
  for (int idx : wanted) {
    if (!col_of_id.count(spec.node_id(idx)))
      throw DataError("ingest: missing column for node '" + spec.node_id(idx) +
                      "'");
  }
  if (col_of_id.size() != wanted.size())
    throw DataError("ingest: column set does not match the expected node set");

  const int T = static_cast<int>(table.rows.size());
  const int n = spec.node_count();
  SeriesPanel panel;
  panel.node_ids = spec.nodes();
  panel.timestamps.resize(T);
  panel.values = Eigen::MatrixXd::Zero(n, T);

  for (int t = 0; t < T; ++t) {
    const auto& row = table.rows[t];
    if (row.size() != table.header.size())
      throw DataError("ingest: row " + std::to_string(t + 1) +
                      " has wrong field count");
    if (row[0].empty())
      throw DataError("ingest: missing timestamp at row " + std::to_string(t + 1));
    panel.timestamps[t] = row[0];
    for (int idx : wanted) {
      const auto& cell = row[col_of_id.at(spec.node_id(idx))];
      if (cell.empty())
        throw DataError("ingest: missing value for node '" + spec.node_id(idx) +
                        "' at timestamp " + row[0]);
      try {
        std::size_t pos = 0;
        panel.values(idx, t) = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("ingest: bad value '" + cell + "' for node '" +
                        spec.node_id(idx) + "' at timestamp " + row[0]);
      }
    }
  }

  const SummingMatrix S = build_summing_matrix(spec);
  if (mode == IngestMode::BottomOnly) {
    for (int t = 0; t < T; ++t) {
      Eigen::VectorXd b(S.m);
      for (int j = 0; j < S.m; ++j) b[j] = panel.values(S.bottom_rows[j], t);
      panel.values.col(t) = S.entries * b;
    }
  } else {
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd col = panel.values.col(t);
      const double residual = coherency_residual(S, col);
      const double scale = std::max(1.0, col.lpNorm<Eigen::Infinity>());
      if (residual > 1e-6 * scale)
        throw DataError("ingest: incoherent observations at timestamp " +
                        panel.timestamps[t] + " (residual " +
                        std::to_string(residual) + ")");
    }
  }
  return panel;
}

void write_csv(const SeriesPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "timestamp";
  for (const auto& id : panel.node_ids) out << ',' << id;
  out << '\n';
  for (int t = 0; t < panel.length(); ++t) {
    out << panel.timestamps[t];
    for (int i = 0; i < panel.node_count(); ++i)
      out << ',' << format_double(panel.values(i, t));
    out << '\n';
  }
}

namespace {

// Spectral radius of the AR companion matrix; < 1 means a stationary process
// (all polynomial roots outside the unit circle).
bool ar_is_stable(const std::vector<double>& phi) {
  const int p = static_cast<int>(phi.size());
  if (p == 0) return true;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) companion(0, i) = phi[i];
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const auto eigenvalues = companion.eigenvalues();
  double radius = 0.0;
  for (int i = 0; i < p; ++i) radius = std::max(radius, std::abs(eigenvalues[i]));
  return radius < 1.0 - 1e-9;
}

}  // namespace

SeriesPanel generate_synthetic(const HierarchySpec& spec, int T,
                               std::uint64_t seed, const SyntheticParams& params) {
  if (T < 20) throw DataError("synthetic: need T >= 20");
  const int m = spec.bottom_count();
  auto coeff_for = [&](int j) -> const std::vector<double>& {
    if (params.ar.empty())
      throw DataError("synthetic: no AR coefficients given");
    return params.ar.size() == 1 ? params.ar[0]
                                 : params.ar.at(static_cast<std::size_t>(j));
  };
  auto level_for = [&](int j) {
    if (params.level.empty()) throw DataError("synthetic: no level given");
    return params.level.size() == 1 ? params.level[0]
                                    : params.level.at(static_cast<std::size_t>(j));
  };
  if (params.ar.size() != 1 && static_cast<int>(params.ar.size()) != m)
    throw DataError("synthetic: expected 1 or " + std::to_string(m) +
                    " AR coefficient sets");
  if (params.level.size() != 1 && static_cast<int>(params.level.size()) != m)
    throw DataError("synthetic: expected 1 or " + std::to_string(m) +
                    " level entries");
  for (int j = 0; j < m; ++j) {
    if (!ar_is_stable(coeff_for(j)))
      throw DataError("synthetic: unstable AR coefficients for bottom node '" +
                      spec.node_id(spec.bottom_indices()[j]) + "'");
  }

  const int burn_in = 50;
  const SummingMatrix S = build_summing_matrix(spec);
  Eigen::MatrixXd bottom(m, T);
  Rng rng(seed);
  for (int j = 0; j < m; ++j) {
    Rng node_rng = rng.fork(static_cast<std::uint64_t>(j));
    const auto& phi = coeff_for(j);
    const int p = static_cast<int>(phi.size());
    std::vector<double> u(static_cast<std::size_t>(burn_in + T), 0.0);
    for (int t = 0; t < burn_in + T; ++t) {
      double value = params.noise_scale * node_rng.normal();
      for (int k = 0; k < p; ++k)
        if (t - 1 - k >= 0) value += phi[k] * u[t - 1 - k];
      u[t] = value;
    }
    const double mean = level_for(j);
    for (int t = 0; t < T; ++t) {
      double season = 0.0;
      if (params.seasonal_period > 0)
        season = params.seasonal_amplitude *
                 std::sin(2.0 * std::numbers::pi * t / params.seasonal_period);
      bottom(j, t) = mean + season + u[burn_in + t];
    }
  }

  SeriesPanel panel;
  panel.node_ids = spec.nodes();
  panel.timestamps.resize(T);
  for (int t = 0; t < T; ++t) panel.timestamps[t] = std::to_string(t);
  panel.values.resize(spec.node_count(), T);
  for (int t = 0; t < T; ++t)
    panel.values.col(t) = S.entries * bottom.col(t);
  return panel;
}

std::pair<SeriesPanel, ScaleStats> scale_panel(const SeriesPanel& panel,
                                               const SplitConfig& split) {
  if (split.history_end < 1 || split.history_end > panel.length())
    throw DataError("scale: conditioning range is out of bounds");
  ScaleStats stats;
  stats.scale.resize(panel.node_count());
  SeriesPanel scaled = panel;
  for (int i = 0; i < panel.node_count(); ++i) {
    const double mean_abs =
        panel.values.row(i).head(split.history_end).cwiseAbs().mean();
    stats.scale[i] = 1.0 + mean_abs;
    scaled.values.row(i) /= stats.scale[i];
  }
  return {scaled, stats};
}

SeriesPanel inverse_scale_panel(const SeriesPanel& scaled, const ScaleStats& stats) {
  if (static_cast<int>(stats.scale.size()) != scaled.node_count())
    throw DataError("inverse scale: statistics do not match panel");
  SeriesPanel out = scaled;
  for (int i = 0; i < out.node_count(); ++i)
    out.values.row(i) *= stats.scale[i];
  return out;
}

}  // namespace hiercast
