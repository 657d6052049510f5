#include "voltctl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace voltctl {

namespace {

std::string describe(const Line& line) {
  std::ostringstream os;
  os << "line (" << line.from << ", " << line.to << ")";
  return os.str();
}

// Disjoint-set forest, used only to name the edge that closes a cycle.
struct UnionFind {
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<int> parent;
};

constexpr double kSparsityTol = 1e-9;

Eigen::SparseMatrix<double> sparsify(const Eigen::MatrixXd& dense,
                                     const std::vector<std::vector<int>>& pattern,
                                     const std::string& what) {
  const auto n = dense.rows();
  const double scale = dense.cwiseAbs().maxCoeff();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < n; ++i) {
    std::vector<bool> allowed(n, false);
    allowed[i] = true;
    for (int j : pattern[i]) allowed[j] = true;
    for (int j = 0; j < n; ++j) {
      const double value = dense(i, j);
      if (allowed[j]) {
        if (std::abs(value) > 1e-12 * scale) triplets.emplace_back(i, j, value);
      } else if (std::abs(value) > kSparsityTol * scale) {
        std::ostringstream os;
        os << what << ": entry (" << i << ", " << j << ") = " << value
           << " lies outside the expected sparsity pattern";
        throw ConditioningError(os.str());
      }
    }
  }
  Eigen::SparseMatrix<double> out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& M, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError(what + " is not positive definite");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  // Reciprocal condition estimate from the Cholesky diagonal.
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  const double ratio = diag.minCoeff() / diag.maxCoeff();
  if (!(ratio * ratio > 1e-14)) {
    throw ConditioningError(what + " is numerically singular (near-zero reactance?)");
  }
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

RadialNetwork::RadialNetwork(int n, double v0, std::vector<Line> lines) : n_(n), v0_(v0) {
  if (n < 1) throw TopologyError("network needs at least one non-substation bus");
  if (!(v0 > 0.0)) throw TopologyError("substation voltage v0 must be positive");
  if (static_cast<int>(lines.size()) != n) {
    std::ostringstream os;
    os << "radial network with " << n << " buses needs exactly " << n << " lines, got "
       << lines.size();
    throw TopologyError(os.str());
  }

  UnionFind uf(n + 1);
  std::vector<std::vector<std::pair<BusId, int>>> adj(n + 1);
  for (int k = 0; k < n; ++k) {
    const Line& line = lines[k];
    if (line.from < 0 || line.from > n || line.to < 0 || line.to > n) {
      throw TopologyError(describe(line) + " references a bus outside 0.." + std::to_string(n));
    }
    if (line.from == line.to) throw TopologyError(describe(line) + " is a self loop");
    if (!(line.x > 0.0)) throw TopologyError(describe(line) + " needs reactance x > 0");
    if (!(line.r >= 0.0)) throw TopologyError(describe(line) + " needs resistance r >= 0");
    if (!uf.unite(line.from, line.to)) {
      throw TopologyError(describe(line) + " closes a cycle");
    }
    adj[line.from].emplace_back(line.to, k);
    adj[line.to].emplace_back(line.from, k);
  }

  parent_.assign(n + 1, -1);
  parent_line_.assign(n + 1, -1);
  depth_.assign(n + 1, 0);
  children_.assign(n + 1, {});
  std::vector<bool> seen(n + 1, false);
  std::vector<int> line_for_bus(n + 1, -1);
  std::queue<BusId> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const BusId bus = frontier.front();
    frontier.pop();
    if (bus != 0) order_.push_back(bus);
    // Visit neighbours in bus order so the canonical order is input-independent.
    auto neighbours = adj[bus];
    std::sort(neighbours.begin(), neighbours.end());
    for (const auto& [next, k] : neighbours) {
      if (seen[next]) continue;
      seen[next] = true;
      parent_[next] = bus;
      depth_[next] = depth_[bus] + 1;
      children_[bus].push_back(next);
      line_for_bus[next] = k;
      frontier.push(next);
    }
  }
  for (BusId bus = 1; bus <= n; ++bus) {
    if (!seen[bus]) {
      throw TopologyError("bus " + std::to_string(bus) + " is not reachable from the substation");
    }
  }

  lines_.reserve(n);
  for (BusId bus : order_) {
    Line line = lines[line_for_bus[bus]];
    line.from = parent_[bus];
    line.to = bus;
    parent_line_[bus] = static_cast<int>(lines_.size());
    lines_.push_back(line);
  }
}

bool RadialNetwork::adjacent(BusId i, BusId j) const {
  if (i == j) return false;
  return parent_.at(i) == j || parent_.at(j) == i;
}

std::vector<BusId> RadialNetwork::interior_path(BusId i, BusId j) const {
  std::vector<BusId> up_i;
  std::vector<BusId> up_j;
  BusId a = i;
  BusId b = j;
  while (depth_[a] > depth_[b]) {
    a = parent_[a];
    up_i.push_back(a);
  }
  while (depth_[b] > depth_[a]) {
    b = parent_[b];
    up_j.push_back(b);
  }
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
    up_i.push_back(a);
    up_j.push_back(b);
  }
  // up_i and up_j both end at the common ancestor; keep it once.
  if (!up_j.empty()) up_j.pop_back();
  std::vector<BusId> path = up_i;
  path.insert(path.end(), up_j.rbegin(), up_j.rend());
  std::erase_if(path, [&](BusId bus) { return bus == i || bus == j; });
  return path;
}

std::vector<std::set<int>> build_paths(const RadialNetwork& net) {
  std::vector<std::set<int>> paths(net.size() + 1);
  for (BusId bus : net.order()) {
    paths[bus] = paths[net.parent(bus)];
    paths[bus].insert(net.parent_line(bus));
  }
  return paths;
}

SensitivityMatrices build_RX(const RadialNetwork& net) {
  const int n = net.size();
  SensitivityMatrices mats;
  mats.R.setZero(n, n);
  mats.X.setZero(n, n);
  // The common path of i and j ends at their lowest common ancestor, so the
  // entry is twice the cumulative impedance from the root to that ancestor.
  std::vector<double> r_cum(n + 1, 0.0);
  std::vector<double> x_cum(n + 1, 0.0);
  for (BusId bus : net.order()) {
    const Line& line = net.lines()[net.parent_line(bus)];
    r_cum[bus] = r_cum[net.parent(bus)] + line.r;
    x_cum[bus] = x_cum[net.parent(bus)] + line.x;
  }
  for (BusId i = 1; i <= n; ++i) {
    for (BusId j = i; j <= n; ++j) {
      BusId a = i;
      BusId b = j;
      while (net.depth(a) > net.depth(b)) a = net.parent(a);
      while (net.depth(b) > net.depth(a)) b = net.parent(b);
      while (a != b) {
        a = net.parent(a);
        b = net.parent(b);
      }
      mats.R(i - 1, j - 1) = mats.R(j - 1, i - 1) = 2.0 * r_cum[a];
      mats.X(i - 1, j - 1) = mats.X(j - 1, i - 1) = 2.0 * x_cum[a];
    }
  }
  return mats;
}

Eigen::SparseMatrix<double> build_Y(const RadialNetwork& net, const Eigen::MatrixXd& X) {
  const int n = net.size();
  std::vector<std::vector<int>> pattern(n);
  for (BusId bus : net.order()) {
    const BusId up = net.parent(bus);
    if (up == 0) continue;
    pattern[bus - 1].push_back(up - 1);
    pattern[up - 1].push_back(bus - 1);
  }
  return sparsify(checked_inverse(X, "reactance sensitivity X"), pattern, "Y = X^-1");
}

SensitivityMatrices build_sensitivities(const RadialNetwork& net) {
  SensitivityMatrices mats = build_RX(net);
  mats.Y = build_Y(net, mats.X);
  return mats;
}

Eigen::MatrixXd reactance_laplacian(const RadialNetwork& net) {
  const int n = net.size();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Line& line : net.lines()) {
    const double y = 1.0 / line.x;
    L(line.to - 1, line.to - 1) += y;
    if (line.from == 0) continue;
    L(line.from - 1, line.from - 1) += y;
    L(line.from - 1, line.to - 1) -= y;
    L(line.to - 1, line.from - 1) -= y;
  }
  return L;
}

CommGraph comm_graph(const RadialNetwork& net, const std::vector<BusId>& buses) {
  const auto m = buses.size();
  std::vector<bool> in_set(net.size() + 1, false);
  for (BusId bus : buses) in_set.at(bus) = true;
  CommGraph graph(m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const auto interior = net.interior_path(buses[a], buses[b]);
      // The substation is a fixed-voltage bus and decouples its subtrees.
      const bool blocked = std::any_of(interior.begin(), interior.end(),
                                       [&](BusId bus) { return bus == 0 || in_set[bus]; });
      if (blocked) continue;
      graph[a].push_back(static_cast<int>(b));
      graph[b].push_back(static_cast<int>(a));
    }
  }
  return graph;
}

ControllableSet reduce_controllable(const RadialNetwork& net, const SensitivityMatrices& mats,
                                    std::vector<BusId> buses) {
  if (buses.empty()) throw std::invalid_argument("controllable set is empty");
  std::sort(buses.begin(), buses.end());
  if (std::adjacent_find(buses.begin(), buses.end()) != buses.end()) {
    throw std::invalid_argument("controllable set lists a bus twice");
  }
  for (BusId bus : buses) {
    if (bus < 1 || bus > net.size()) {
      throw std::invalid_argument("controllable bus " + std::to_string(bus) + " outside 1.." +
                                  std::to_string(net.size()));
    }
  }
  ControllableSet set;
  set.buses = buses;
  const auto m = static_cast<int>(buses.size());
  set.X_C.resize(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) set.X_C(a, b) = mats.X(buses[a] - 1, buses[b] - 1);
  }
  set.graph = comm_graph(net, buses);
  set.Y_C = sparsify(checked_inverse(set.X_C, "reduced sensitivity X_C"), set.graph, "X_C^-1");
  return set;
}

}  // namespace voltctl
