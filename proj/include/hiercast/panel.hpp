#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hiercast/hierarchy.hpp"

namespace hiercast {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Aligned observations for every node of a hierarchy: an n x T matrix in
// canonical node order, with one timestamp label per column.
struct SeriesPanel {
  Eigen::MatrixXd values;               // n x T
  std::vector<std::string> timestamps;  // length T
  std::vector<std::string> node_ids;    // length n, canonical order

  int node_count() const { return static_cast<int>(values.rows()); }
  int length() const { return static_cast<int>(values.cols()); }

  // Columns [start, start + len).
  SeriesPanel slice(int start, int len) const;
};

// Train/test split: the first history_end columns are the conditioning range,
// the following horizon columns the prediction range.
struct SplitConfig {
  int history_end = 0;
  int horizon = 0;
  int validation_folds = 3;

  void validate(int T) const;
};

enum class IngestMode { BottomOnly, AllNodes };

// CSV with a leading `timestamp` column and one column per node id. In
// bottom-only mode the file lists exactly the bottom nodes and upper series
// are computed through the summing matrix; in all-nodes mode every node must
// be present and coherency is verified (1e-6 relative tolerance).
SeriesPanel ingest_csv(const std::string& path, const HierarchySpec& spec,
                       IngestMode mode);

void write_csv(const SeriesPanel& panel, const std::string& path);

struct SyntheticParams {
  // AR coefficients per bottom node; a single entry is broadcast to all.
  std::vector<std::vector<double>> ar = {{0.6}};
  double noise_scale = 1.0;
  int seasonal_period = 0;  // 0 disables the seasonal component
  double seasonal_amplitude = 0.0;
  // Stationary level per bottom node; a single entry is broadcast.
  std::vector<double> level = {10.0};
};

// Coherent panel whose bottom series are Gaussian AR processes (about their
// level, plus optional sinusoidal seasonality) and whose upper series are
// formed through the summing matrix. Deterministic given the seed.
SeriesPanel generate_synthetic(const HierarchySpec& spec, int T,
                               std::uint64_t seed, const SyntheticParams& params);

// Per-node scale factors 1 + mean|y| over the conditioning range.
struct ScaleStats {
  std::vector<double> scale;
};

std::pair<SeriesPanel, ScaleStats> scale_panel(const SeriesPanel& panel,
                                               const SplitConfig& split);

SeriesPanel inverse_scale_panel(const SeriesPanel& scaled, const ScaleStats& stats);

}  // namespace hiercast
