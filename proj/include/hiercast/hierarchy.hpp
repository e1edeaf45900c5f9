#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hiercast {

// Malformed tree structure (cycle, multiple roots, orphan, ...). The message
// names the offending node.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Aggregation tree for a collection of series. Nodes are held in level order:
// root first, then level by level, stable within a level in input order.
// Every matrix and panel in the library follows this ordering, with bottom
// (leaf) nodes additionally ordered by their appearance here.
class HierarchySpec {
 public:
  // Builds from (child, parent) pairs; the root is declared with an empty
  // parent field. Throws StructuralError on malformed input.
  static HierarchySpec from_edges(
      const std::vector<std::pair<std::string, std::string>>& edges);

  // Plain-text edge list, one "child,parent" pair per line; the root line has
  // an empty parent field. Blank lines are ignored.
  static HierarchySpec from_file(const std::string& path);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int bottom_count() const { return static_cast<int>(bottom_.size()); }

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& node_id(int i) const { return nodes_[i]; }

  // Canonical index of a node id; throws StructuralError if unknown.
  int index_of(const std::string& id) const;
  bool has_node(const std::string& id) const;

  int parent_of(int i) const { return parent_[i]; }  // -1 for the root
  const std::vector<int>& children_of(int i) const { return children_[i]; }
  bool is_bottom(int i) const { return children_[i].empty(); }

  int level_of(int i) const { return level_[i]; }  // root = 1
  int level_count() const { return level_count_; }

  // Bottom (leaf) node indices in canonical order; column j of the summing
  // matrix corresponds to bottom_indices()[j].
  const std::vector<int>& bottom_indices() const { return bottom_; }
  // Non-leaf node indices in canonical order.
  const std::vector<int>& internal_indices() const { return internal_; }

  // Serializes back to the edge-list format accepted by from_file.
  std::string to_edge_list() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> level_;
  std::vector<int> bottom_;
  std::vector<int> internal_;
  int level_count_ = 0;
};

// The n x m 0/1 matrix mapping bottom series to all series. Row order matches
// HierarchySpec::nodes(), column j matches bottom_indices()[j].
struct SummingMatrix {
  Eigen::MatrixXd entries;
  int n = 0;
  int m = 0;
  std::vector<int> bottom_rows;  // row index of column j's node
};

SummingMatrix build_summing_matrix(const HierarchySpec& spec);

// S * b. b must have length m.
Eigen::VectorXd aggregate_bottom(const SummingMatrix& S, const Eigen::VectorXd& b);

// Worst-node aggregation discrepancy: || y - S * y_bottom ||_inf.
// Zero exactly when y is coherent.
double coherency_residual(const SummingMatrix& S, const Eigen::VectorXd& y);

}  // namespace hiercast
