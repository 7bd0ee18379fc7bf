#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "lpattack/graph.hpp"

using namespace lpattack;
using namespace lpattack::testing;

TEST(Graph, ToyDegreesIncludeSelfLoop) {
  const Graph g = toy_graph();
  ASSERT_EQ(g.num_nodes(), 10u);
  EXPECT_EQ(g.num_edges(), 12u);
  EXPECT_EQ(g.degree(kV), 4u);
  for (NodeId u : {2u, 3u, 5u, 7u}) EXPECT_EQ(g.degree(u), 5u) << g.name(u);
  for (NodeId u : {1u, 4u, 6u, 8u, 9u}) EXPECT_EQ(g.degree(u), 2u) << g.name(u);
}

TEST(Graph, NamesResolve) {
  const Graph g = toy_graph();
  EXPECT_EQ(g.find("u7"), std::optional<NodeId>(7));
  EXPECT_EQ(g.find("v"), std::optional<NodeId>(0));
  EXPECT_EQ(g.find("3"), std::optional<NodeId>(3));
  EXPECT_FALSE(g.find("u42").has_value());
  EXPECT_FALSE(g.find("99").has_value());
}

TEST(Graph, DeduplicatesAndDropsSelfLoops) {
  std::vector<std::pair<NodeId, NodeId>> edges{{0, 1}, {1, 0}, {0, 1}, {2, 2}, {1, 2}};
  Graph g(3, edges, {}, 1);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.degree(2), 2u);
  EXPECT_FALSE(g.has_edge(2, 2));
  EXPECT_TRUE(g.has_edge(1, 0));
}

TEST(Graph, EmptyEdgeListGivesIsolatedNodes) {
  Graph g(4, {}, {}, 2);
  for (NodeId u = 0; u < 4; ++u) EXPECT_EQ(g.degree(u), 1u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(Graph, RejectsBadInput) {
  std::vector<std::pair<NodeId, NodeId>> out_of_range{{0, 5}};
  EXPECT_THROW(Graph(3, out_of_range, {}, 1), DataError);
  EXPECT_THROW(Graph(2, {}, {0, 3}, 2), DataError);
  EXPECT_THROW(Graph(2, {}, {0}, 2), UsageError);
  const Graph g = toy_graph();
  EXPECT_THROW(g.check_node(10), UsageError);
}

TEST(Graph, ForEachNeighborVisitsSelfFirst) {
  const Graph g = toy_graph();
  std::vector<NodeId> seen;
  g.for_each_neighbor(kV, [&](NodeId w) { seen.push_back(w); });
  EXPECT_EQ(seen, (std::vector<NodeId>{0, 2, 3, 5}));
}

TEST(EdgeOverlay, ToggleAddsAndRemoves) {
  const Graph g = toy_graph();
  EdgeOverlay o(g, kV);
  o.toggle(7);
  EXPECT_TRUE(o.has_edge(kV, 7));
  EXPECT_TRUE(o.has_edge(7, kV));
  EXPECT_EQ(o.degree(kV), 5u);
  EXPECT_EQ(o.degree(7), 6u);
  o.toggle(3);
  EXPECT_FALSE(o.has_edge(kV, 3));
  EXPECT_EQ(o.degree(kV), 4u);
  EXPECT_EQ(o.degree(3), 4u);
  EXPECT_EQ(o.perturbation_size(), 2u);
  EXPECT_EQ(g.degree(kV), 4u);  // base untouched
}

TEST(EdgeOverlay, RetoggleRestores) {
  const Graph g = toy_graph();
  EdgeOverlay o(g, kV);
  o.toggle(7);
  o.toggle(7);
  EXPECT_EQ(o.perturbation_size(), 0u);
  EXPECT_FALSE(o.has_edge(kV, 7));
  EXPECT_EQ(o.degree(kV), g.degree(kV));
}

TEST(EdgeOverlay, SelfToggleIsRejected) {
  const Graph g = toy_graph();
  EdgeOverlay o(g, kV);
  EXPECT_THROW(o.toggle(kV), UsageError);
  EXPECT_THROW(o.toggle(42), UsageError);
}

TEST(EdgeOverlay, MaterializeMatchesView) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(rng, 15, 0.2, 3);
    EdgeOverlay o(g, 0);
    std::uniform_int_distribution<NodeId> pick(1, 14);
    for (int i = 0; i < 5; ++i) o.toggle(pick(rng));
    const Graph m = o.materialize();
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      EXPECT_EQ(m.degree(u), o.degree(u));
      auto a = neighbors(m, u), b = neighbors(o, u);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      EXPECT_EQ(a, b);
      for (NodeId w = 0; w < g.num_nodes(); ++w) {
        if (u == w) continue;
        EXPECT_EQ(m.has_edge(u, w), o.has_edge(u, w));
      }
    }
  }
}

TEST(KHop, ToyTwoHopSet) {
  const Graph g = toy_graph();
  EXPECT_EQ(k_hop(g, kV, 0), (std::vector<NodeId>{0}));
  EXPECT_EQ(k_hop(g, kV, 1), (std::vector<NodeId>{0, 2, 3, 5}));
  EXPECT_EQ(k_hop(g, kV, 2), (std::vector<NodeId>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(Walks, ToyWalksToU7) {
  const Graph g = toy_graph();
  const auto ws = enumerate_walks(g, kV, 7, 2);
  std::vector<std::vector<NodeId>> expect{{0, 2, 7}, {0, 5, 7}};
  EXPECT_EQ(ws.walks, expect);
  EXPECT_TRUE(enumerate_walks(g, kV, 9, 2).walks.empty());
}

TEST(Walks, SelfLoopStepsCounted) {
  const Graph g = toy_graph();
  const auto ws = enumerate_walks(g, kV, 2, 2);
  // v-v-u2, v-u2-u2, v-u3-u2
  EXPECT_EQ(ws.walks.size(), 3u);
}

TEST(Walks, WalkCountMatchesAdjacencyPower) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(rng, 10, 0.3, 2);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(10, 10);
    for (auto [x, y] : g.edge_list()) a(x, y) = a(y, x) = 1.0;
    const Eigen::MatrixXd a3 = a * a * a;
    for (NodeId u = 0; u < 10; ++u)
      EXPECT_EQ(static_cast<double>(enumerate_walks(g, 0, u, 3).walks.size()), a3(0, u));
  }
}

TEST(Propagation, PowerRowMatchesOracle) {
  const Graph g = toy_graph();
  EXPECT_NEAR(norm_adj_power_row(g, kV, 2)[6], toy::kPowerRowVU6, 1e-12);
  const auto sparse = propagation_row(g, kV, 2);
  const auto dense = norm_adj_power_row(g, kV, 2);
  for (const auto& [u, w] : sparse) EXPECT_NEAR(w, dense[u], 1e-14);
  EXPECT_EQ(sparse.size(), k_hop(g, kV, 2).size());
}

TEST(Propagation, DepthZeroIsIndicator) {
  const Graph g = toy_graph();
  const auto row = norm_adj_power_row(g, 3, 0);
  for (NodeId u = 0; u < g.num_nodes(); ++u) EXPECT_EQ(row[u], u == 3 ? 1.0 : 0.0);
}

TEST(Propagation, RandomRowsMatchDensePower) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(rng, 20, 0.15, 2);
    for (int k = 1; k <= 4; ++k) {
      const auto p = dense_power(g, k);
      const auto row = norm_adj_power_row(g, 0, k);
      for (NodeId u = 0; u < g.num_nodes(); ++u) EXPECT_NEAR(row[u], p(0, u), 1e-12);
    }
  }
}

TEST(DegreeOverrides, FallsBackToGraph) {
  const Graph g = toy_graph();
  DegreeOverrides d{{kV, 5.0}};
  EXPECT_EQ(d.degree(g, kV), 5.0);
  EXPECT_EQ(d.degree(g, 7), 5.0);
  EXPECT_EQ(d.degree(g, 1), 2.0);
  d.set(kV, 3.0);
  EXPECT_EQ(d.degree(g, kV), 3.0);
}
