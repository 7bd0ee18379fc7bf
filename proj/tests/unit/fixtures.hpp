#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lpattack/data.hpp"
#include "lpattack/graph.hpp"

namespace lpattack::testing {

// Toy bundle ids: v = 0, u1..u9 = 1..9.
inline constexpr NodeId kV = 0;

inline Graph toy_graph() { return load_bundle(std::string(LPATTACK_TESTDATA) + "/toy").graph; }

// Values frozen from tests/oracles/toy_oracle.py (dense numpy matrix powers).
namespace toy {
inline constexpr double kCleanObjective = -0.383833737106;
inline constexpr double kConstantAdd = -0.303245553203;
inline constexpr double kConstantDelete = -0.530466843736;
inline constexpr double kExactAddU6 = -0.177145253925;
inline constexpr double kExactAddU7 = -0.276605344063;
inline constexpr double kExactAddU8 = -0.165539478672;
inline constexpr double kExactDelU2 = -0.250539693414;
inline constexpr double kExactDelU3 = -0.256634942384;
inline constexpr double kDeltaAddU6 = 0.137706074532;
inline constexpr double kDeltaAddU7 = 0.033610534806;
inline constexpr double kDeltaAddU8 = 0.137706074532;
inline constexpr double kDeltaDelU2 = -0.286022399291;
inline constexpr double kDeltaDelU3 = -0.286022399291;
inline constexpr double kDfsU7Depth1 = 0.2;
inline constexpr double kPowerRowVU6 = 0.070710678119;
}  // namespace toy

// Random simple graph with n nodes, edge probability p, labels in [0, classes).
inline Graph random_graph(std::mt19937_64& rng, std::size_t n, double p, std::size_t classes,
                          std::size_t feature_dim = 0) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b)
      if (coin(rng) < p) edges.emplace_back(a, b);
  std::vector<ClassId> labels(n);
  for (auto& y : labels) y = label(rng);
  std::optional<SparseRows> features;
  if (feature_dim > 0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    SparseRows x;
    x.cols = feature_dim;
    for (std::size_t u = 0; u < n; ++u) {
      std::vector<std::pair<std::uint32_t, double>> row;
      for (std::uint32_t j = 0; j < feature_dim; ++j) row.emplace_back(j, gauss(rng));
      x.push_row(row);
    }
    features = std::move(x);
  }
  return Graph(n, edges, std::move(labels), classes, std::move(features));
}

// Dense D^{-1/2}(A+I)D^{-1/2} built from the edge list only.
inline Eigen::MatrixXd dense_norm_adj(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (auto [x, y] : g.edge_list()) {
    a(x, y) = 1.0;
    a(y, x) = 1.0;
  }
  const Eigen::VectorXd d = a.rowwise().sum();
  const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * a * s.asDiagonal();
}

inline Eigen::MatrixXd dense_power(const Graph& g, int k) {
  const Eigen::MatrixXd a = dense_norm_adj(g);
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) out = out * a;
  return out;
}

// Objective from the dense power: sum over target-label nodes minus sum over
// own-label nodes of (Â^K)_{v,u}.
inline double dense_objective(const Graph& g, NodeId v, ClassId c, ClassId own, int k) {
  const Eigen::MatrixXd p = dense_power(g, k);
  double total = 0.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (g.label(u) == c) total += p(v, u);
    else if (g.label(u) == own) total -= p(v, u);
  }
  return total;
}

}  // namespace lpattack::testing
