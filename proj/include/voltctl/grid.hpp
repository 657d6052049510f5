#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace voltctl {

/// Bus index in 0..n. Bus 0 is the substation; controllable quantities live on
/// buses 1..n and are stored at vector position bus - 1.
using BusId = int;

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Line {
  BusId from = 0;
  BusId to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
};

/// Radial feeder rooted at bus 0. Construction validates that the lines form a
/// spanning tree and re-orients every line away from the substation.
class RadialNetwork {
 public:
  /// Throws TopologyError naming the offending edge for cycles, duplicate or
  /// self edges, out-of-range buses and disconnected buses.
  RadialNetwork(int n, double v0, std::vector<Line> lines);

  int size() const { return n_; }
  double v0() const { return v0_; }

  /// Lines in canonical order: lines()[k] feeds bus order()[k].
  const std::vector<Line>& lines() const { return lines_; }
  /// Buses 1..n in root-first (BFS) order.
  const std::vector<BusId>& order() const { return order_; }

  BusId parent(BusId bus) const { return parent_.at(bus); }
  /// Index into lines() of the line entering `bus` from its parent.
  int parent_line(BusId bus) const { return parent_line_.at(bus); }
  const std::vector<BusId>& children(BusId bus) const { return children_.at(bus); }
  int depth(BusId bus) const { return depth_.at(bus); }

  /// True when i != j and a line connects them.
  bool adjacent(BusId i, BusId j) const;

  /// Buses on the tree path strictly between i and j (excludes both ends).
  std::vector<BusId> interior_path(BusId i, BusId j) const;

 private:
  int n_;
  double v0_;
  std::vector<Line> lines_;
  std::vector<BusId> order_;
  std::vector<BusId> parent_;
  std::vector<int> parent_line_;
  std::vector<int> depth_;
  std::vector<std::vector<BusId>> children_;
};

/// path(i) = indices into net.lines() on the unique path 0 -> i. path(0) is empty.
std::vector<std::set<int>> build_paths(const RadialNetwork& net);

struct SensitivityMatrices {
  Eigen::MatrixXd R;
  Eigen::MatrixXd X;
  Eigen::SparseMatrix<double> Y;  // X^{-1}, nonzero only on diagonal + adjacency
};

/// R and X from the path-intersection formula [X]_ij = 2 * sum of x over P_i ∩ P_j.
/// The returned Y is empty; use build_Y or build_sensitivities.
SensitivityMatrices build_RX(const RadialNetwork& net);

/// Y = X^{-1}, sparsified to the physical adjacency pattern. Throws
/// ConditioningError if X is numerically singular or if entries outside the
/// adjacency pattern are not negligible.
Eigen::SparseMatrix<double> build_Y(const RadialNetwork& net, const Eigen::MatrixXd& X);

SensitivityMatrices build_sensitivities(const RadialNetwork& net);

/// Entrywise closed form: diagonal sum of 1/x over incident lines (substation
/// line included), -1/x_ij for adjacent pairs. Equals 2 * X^{-1} under the
/// factor-2 convention of X, so it serves only as a validation oracle.
Eigen::MatrixXd reactance_laplacian(const RadialNetwork& net);

/// Symmetric adjacency among `buses` (positions into that list).
using CommGraph = std::vector<std::vector<int>>;

/// i, j in `buses` communicate iff the tree path between them crosses no
/// other bus of `buses`.
CommGraph comm_graph(const RadialNetwork& net, const std::vector<BusId>& buses);

struct ControllableSet {
  std::vector<BusId> buses;           // sorted, each in 1..n
  Eigen::MatrixXd X_C;                // principal submatrix of X
  Eigen::SparseMatrix<double> Y_C;    // X_C^{-1} on the comm-graph pattern
  CommGraph graph;
};

/// Throws std::invalid_argument for an empty set or buses outside 1..n.
ControllableSet reduce_controllable(const RadialNetwork& net, const SensitivityMatrices& mats,
                                    std::vector<BusId> buses);

}  // namespace voltctl
