#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "gnnlink/error.hpp"
#include "gnnlink/network.hpp"
#include "oracles.hpp"

using namespace gnnlink;

namespace {

std::vector<ProductRecord> named(std::initializer_list<const char*> ids) {
  std::vector<ProductRecord> out;
  for (auto id : ids) {
    ProductRecord p;
    p.product_id = id;
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST(BuildNetwork, TriangleFromOneCustomer) {
  const std::vector<ConsiderationRecord> recs{{"c1", {"A", "B", "C"}}};
  const auto g = build_network(recs, named({"A", "B", "C"}));
  EXPECT_EQ(g.edge_count(), 3u);
  EXPECT_TRUE(oracle::well_formed(g));
}

TEST(BuildNetwork, CutoffTwo) {
  const std::vector<ConsiderationRecord> recs{{"c1", {"A", "B"}}, {"c2", {"A", "B"}}, {"c3", {"B", "C"}}};
  const auto g = build_network(recs, named({"A", "B", "C"}), 2);
  EXPECT_EQ(g.edges(), (std::vector<NodePair>{{0, 1}}));
  EXPECT_EQ(g.pair_counts().at({0, 1}), 2u);
  EXPECT_EQ(g.pair_counts().at({1, 2}), 1u);
}

TEST(BuildNetwork, SingletonsAddNoEdges) {
  const std::vector<ConsiderationRecord> recs{{"c1", {"A"}}, {"c2", {"B"}}};
  const auto g = build_network(recs, named({"A", "B"}));
  EXPECT_EQ(g.edge_count(), 0u);
  EXPECT_EQ(g.size(), 2u);
}

TEST(BuildNetwork, Errors) {
  const std::vector<ConsiderationRecord> recs{{"c1", {"A", "Z"}}};
  EXPECT_THROW(build_network(recs, named({"A", "B"})), DataError);
  EXPECT_THROW(build_network({}, named({"A", "B"}), 0), ConfigError);
}

TEST(BuildNetwork, MatchesBruteForceOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(9);
    const auto prods = oracle::make_products(n, rng);
    const auto recs = oracle::make_records(n, rng.uniform_index(31), rng);
    const auto cutoff = static_cast<std::uint32_t>(1 + rng.uniform_index(3));
    const auto g = build_network(recs, prods, cutoff);
    const auto counts = oracle::brute_force_counts(recs, n);
    ASSERT_TRUE(oracle::well_formed(g));
    for (NodeIndex i = 0; i < n; ++i)
      for (NodeIndex j = i + 1; j < n; ++j) {
        const auto it = counts.find({i, j});
        const std::uint32_t c = it == counts.end() ? 0 : it->second;
        EXPECT_EQ(g.has_edge(i, j), c >= cutoff);
      }
    EXPECT_EQ(g.pair_counts().size(), counts.size());
  }
}

TEST(Network, ConstructorSymmetrizesAndRejectsLoops) {
  const std::vector<NodePair> edges{{1, 0}, {0, 1}, {2, 1}};
  const CoConsiderationNetwork g({"a", "b", "c"}, edges);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(oracle::well_formed(g));
  const std::vector<NodePair> loop{{1, 1}};
  EXPECT_THROW(CoConsiderationNetwork({"a", "b"}, loop), DataError);
}

TEST(Network, DensityAndDegree) {
  Rng rng(2);
  const auto g = oracle::random_graph(30, 0.3, rng);
  EXPECT_DOUBLE_EQ(network_density(g), static_cast<double>(g.edge_count()) / (30.0 * 29.0 / 2.0));
  EXPECT_DOUBLE_EQ(mean_degree(g), 2.0 * static_cast<double>(g.edge_count()) / 30.0);
}

TEST(Network, EdgeListRoundTrip) {
  Rng rng(8);
  const auto g = oracle::random_graph(25, 0.2, rng);
  EXPECT_EQ(read_network(write_node_manifest(g), write_edge_list(g)), g);
}

TEST(SplitEdges, TenPercentOfHundred) {
  Rng rng(5);
  auto g = oracle::random_graph(40, 0.0, rng);
  std::vector<NodePair> edges;
  for (NodeIndex i = 0; edges.size() < 100; ++i)
    for (NodeIndex j = i + 1; j < 40 && edges.size() < 100; ++j) edges.push_back({i, j});
  g = CoConsiderationNetwork(g.node_ids(), edges);
  const auto split = split_edges(g, 0.1, 3);
  EXPECT_EQ(std::count_if(split.test.begin(), split.test.end(), [](auto& p) { return p.label == 1; }), 10);
  EXPECT_EQ(split.test.size(), 20u);
  EXPECT_EQ(split.train.size(), 180u);
  EXPECT_EQ(split.training.edge_count(), 90u);
}

TEST(SplitEdges, BalancedDisjointAndConsistent) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = oracle::random_graph(12 + trial, 0.2, rng);
    if (g.edge_count() == 0) continue;
    const auto split = split_edges(g, 0.25, trial);
    auto count = [](const std::vector<LabeledPair>& v, int label) {
      return std::count_if(v.begin(), v.end(), [&](auto& p) { return p.label == label; });
    };
    EXPECT_EQ(count(split.train, 1), count(split.train, 0));
    EXPECT_EQ(count(split.test, 1), count(split.test, 0));
    std::set<NodePair> seen;
    for (const auto* set : {&split.train, &split.test})
      for (const auto& p : *set) {
        EXPECT_TRUE(seen.insert(make_pair_key(p.u, p.v)).second);
        EXPECT_EQ(g.has_edge(p.u, p.v), p.label == 1);
      }
    for (const auto& p : split.test)
      if (p.label == 1) EXPECT_FALSE(split.training.has_edge(p.u, p.v));
    for (const auto& p : split.train)
      if (p.label == 1) EXPECT_TRUE(split.training.has_edge(p.u, p.v));
    EXPECT_TRUE(oracle::well_formed(split.training));
  }
}

TEST(SplitEdges, DenseGraphThrows) {
  std::vector<NodePair> edges{{0, 1}, {0, 2}, {1, 2}, {0, 3}};
  const CoConsiderationNetwork g({"a", "b", "c", "d"}, edges);
  EXPECT_THROW(split_edges(g, 0.5, 1), DataError);
}

TEST(SplitEdges, SeedDeterminesSplit) {
  Rng rng(1);
  const auto g = oracle::random_graph(30, 0.2, rng);
  EXPECT_EQ(split_edges(g, 0.1, 4).test, split_edges(g, 0.1, 4).test);
  EXPECT_NE(split_edges(g, 0.1, 4).test, split_edges(g, 0.1, 5).test);
}

TEST(Knn, MatchesExhaustiveOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = oracle::random_features(8, 3, rng);
    if (trial % 4 == 0) {  // plant exact ties
      for (std::size_t j = 0; j < 3; ++j) f(5, j) = f(2, j);
    }
    const std::size_t k = 2;
    std::set<NodePair> expected;
    for (std::size_t i = 0; i < 8; ++i) {
      std::vector<std::size_t> order;
      for (std::size_t j = 0; j < 8; ++j)
        if (j != i) order.push_back(j);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cosine_similarity(f, i, a) > cosine_similarity(f, i, b);
      });
      for (std::size_t r = 0; r < k; ++r)
        expected.insert(make_pair_key(static_cast<NodeIndex>(i), static_cast<NodeIndex>(order[r])));
    }
    const auto g = knn_adjacency(f, k);
    const auto edges = g.edges();
    EXPECT_EQ(std::set<NodePair>(edges.begin(), edges.end()), expected);
    EXPECT_TRUE(oracle::well_formed(g));
    for (NodeIndex v = 0; v < 8; ++v) EXPECT_GE(g.degree(v), k);
  }
}

TEST(Knn, DuplicateRowIsFirstNeighbor) {
  Rng rng(3);
  auto f = oracle::random_features(10, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) f(7, j) = f(3, j);
  const auto g = knn_adjacency(f, 1);
  EXPECT_TRUE(g.has_edge(3, 7));
}

TEST(Knn, FullKIsComplete) {
  Rng rng(3);
  const auto f = oracle::random_features(9, 4, rng);
  EXPECT_EQ(knn_adjacency(f, 8).edge_count(), 36u);
  EXPECT_THROW(knn_adjacency(f, 9), ConfigError);
  EXPECT_THROW(knn_adjacency(f, 0), ConfigError);
}

TEST(Knn, ParallelPathMatchesSmallPath) {
  // Above the threading threshold the result must not depend on scheduling; compare a
  // large instance against the per-node oracle on a few rows.
  Rng rng(31);
  const auto f = oracle::random_features(300, 6, rng);
  const auto g = knn_adjacency(f, 5);
  EXPECT_TRUE(oracle::well_formed(g));
  EXPECT_EQ(knn_adjacency(f, 5), g);
  for (std::size_t i : {0u, 150u, 299u}) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < 300; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cosine_similarity(f, i, a) > cosine_similarity(f, i, b);
    });
    for (std::size_t r = 0; r < 5; ++r)
      EXPECT_TRUE(g.has_edge(static_cast<NodeIndex>(i), static_cast<NodeIndex>(order[r])));
  }
}

TEST(ChooseK, Rules) {
  std::vector<NodePair> ring;
  for (NodeIndex i = 0; i < 10; ++i) {
    ring.push_back(make_pair_key(i, (i + 1) % 10));
    ring.push_back(make_pair_key(i, (i + 2) % 10));
  }
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(std::to_string(i));
  EXPECT_EQ(choose_k(CoConsiderationNetwork(ids, ring)), 2u);  // 4-regular
  const std::vector<NodePair> one{{0, 1}};
  EXPECT_EQ(choose_k(CoConsiderationNetwork(ids, one)), 1u);
  // mean degree 57 -> 29 (round half away from zero on 28.5)
  std::vector<std::string> big;
  for (int i = 0; i < 100; ++i) big.push_back(std::to_string(i));
  std::vector<NodePair> e;
  for (NodeIndex i = 0; i < 100 && e.size() < 2850; ++i)
    for (NodeIndex j = i + 1; j < 100 && e.size() < 2850; ++j) e.push_back({i, j});
  EXPECT_EQ(choose_k(CoConsiderationNetwork(big, e)), 29u);
}
