#include "hiercast/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hiercast {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

HierarchySpec HierarchySpec::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  if (edges.empty()) throw StructuralError("hierarchy: empty edge list");

  std::vector<std::string> order;                       // input order
  std::unordered_map<std::string, std::string> parent;  // child -> parent
  std::string root;
  for (const auto& [child, par] : edges) {
    if (child.empty()) throw StructuralError("hierarchy: empty node id");
    if (parent.count(child))
      throw StructuralError("hierarchy: node '" + child +
                            "' declared with more than one parent");
    parent[child] = par;
    order.push_back(child);
    if (par.empty()) {
      if (!root.empty())
        throw StructuralError("hierarchy: multiple roots ('" + root +
                              "', '" + child + "')");
      root = child;
    }
  }
  if (root.empty()) throw StructuralError("hierarchy: no root declared");
  for (const auto& [child, par] : parent) {
    if (!par.empty() && !parent.count(par))
      throw StructuralError("hierarchy: node '" + child +
                            "' references undeclared parent '" + par + "'");
  }

  // Depth of every node by walking up to the root; a walk that revisits a
  // node or exceeds the node count is a cycle.
  std::unordered_map<std::string, int> depth;
  const int n = static_cast<int>(order.size());
  for (const auto& id : order) {
    int d = 1;
    std::string cur = id;
    while (!parent.at(cur).empty()) {
      cur = parent.at(cur);
      if (++d > n)
        throw StructuralError("hierarchy: cycle involving node '" + id + "'");
    }
    depth[id] = d;
  }

  // Level order, stable by input position within a level.
  std::vector<int> idx(order.size());
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return depth.at(order[a]) < depth.at(order[b]);
  });

  HierarchySpec spec;
  std::unordered_map<std::string, int> pos;
  for (int i : idx) {
    pos[order[i]] = static_cast<int>(spec.nodes_.size());
    spec.nodes_.push_back(order[i]);
  }
  spec.parent_.assign(n, -1);
  spec.children_.assign(n, {});
  spec.level_.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto& id = spec.nodes_[i];
    spec.level_[i] = depth.at(id);
    spec.level_count_ = std::max(spec.level_count_, spec.level_[i]);
    const auto& par = parent.at(id);
    if (!par.empty()) {
      spec.parent_[i] = pos.at(par);
      spec.children_[pos.at(par)].push_back(i);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (spec.children_[i].empty())
      spec.bottom_.push_back(i);
    else
      spec.internal_.push_back(i);
  }
  return spec;
}

HierarchySpec HierarchySpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("hierarchy: cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw StructuralError("hierarchy: malformed line '" + line +
                            "' (expected child,parent)");
    edges.emplace_back(trim(line.substr(0, comma)), trim(line.substr(comma + 1)));
  }
  return from_edges(edges);
}

int HierarchySpec::index_of(const std::string& id) const {
  for (int i = 0; i < node_count(); ++i)
    if (nodes_[i] == id) return i;
  throw StructuralError("hierarchy: unknown node '" + id + "'");
}

bool HierarchySpec::has_node(const std::string& id) const {
  return std::find(nodes_.begin(), nodes_.end(), id) != nodes_.end();
}

std::string HierarchySpec::to_edge_list() const {
  std::ostringstream out;
  for (int i = 0; i < node_count(); ++i) {
    out << nodes_[i] << ',';
    if (parent_[i] >= 0) out << nodes_[parent_[i]];
    out << '\n';
  }
  return out.str();
}

void HierarchySpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw StructuralError("hierarchy: cannot write '" + path + "'");
  out << to_edge_list();
}

SummingMatrix build_summing_matrix(const HierarchySpec& spec) {
  const int n = spec.node_count();
  const int m = spec.bottom_count();
  SummingMatrix S;
  S.n = n;
  S.m = m;
  S.bottom_rows = spec.bottom_indices();
  S.entries = Eigen::MatrixXd::Zero(n, m);
  for (int j = 0; j < m; ++j) {
    // walk from bottom node j up to the root, marking every ancestor
    int cur = S.bottom_rows[j];
    while (cur >= 0) {
      S.entries(cur, j) = 1.0;
      cur = spec.parent_of(cur);
    }
  }
  return S;
}

Eigen::VectorXd aggregate_bottom(const SummingMatrix& S, const Eigen::VectorXd& b) {
  if (b.size() != S.m)
    throw std::invalid_argument("aggregate_bottom: expected vector of length " +
                                std::to_string(S.m) + ", got " +
                                std::to_string(b.size()));
  return S.entries * b;
}

double coherency_residual(const SummingMatrix& S, const Eigen::VectorXd& y) {
  if (y.size() != S.n)
    throw std::invalid_argument("coherency_residual: expected vector of length " +
                                std::to_string(S.n) + ", got " +
                                std::to_string(y.size()));
  Eigen::VectorXd b(S.m);
  for (int j = 0; j < S.m; ++j) b[j] = y[S.bottom_rows[j]];
  return (y - S.entries * b).lpNorm<Eigen::Infinity>();
}

}  // namespace hiercast
