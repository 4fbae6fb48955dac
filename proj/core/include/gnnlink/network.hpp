#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gnnlink/encode.hpp"
#include "gnnlink/ingest.hpp"

namespace gnnlink {

using NodeIndex = std::uint32_t;
using NodePair = std::pair<NodeIndex, NodeIndex>;  // stored with first < second

constexpr NodePair make_pair_key(NodeIndex a, NodeIndex b) noexcept {
  return a < b ? NodePair{a, b} : NodePair{b, a};
}

/// Undirected binary product network with zero diagonal. Every construction path goes
/// through the constructor, which enforces symmetry.
class CoConsiderationNetwork {
 public:
  CoConsiderationNetwork() = default;
  /// Edges may be given in either orientation; self-loops throw, duplicates collapse.
  CoConsiderationNetwork(std::vector<std::string> node_ids, std::span<const NodePair> edges);

  std::size_t size() const noexcept { return node_ids_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
  std::optional<NodeIndex> index_of(std::string_view id) const;

  bool has_edge(NodeIndex a, NodeIndex b) const { return dense_[static_cast<std::size_t>(a) * size() + b] != 0; }
  /// Sorted ascending.
  std::span<const NodeIndex> neighbors(NodeIndex v) const { return neighbors_[v]; }
  std::size_t degree(NodeIndex v) const { return neighbors_[v].size(); }
  /// All edges as (u < v), lexicographically sorted.
  std::vector<NodePair> edges() const;

  /// Link threshold used to build the network (0 when not built from survey counts).
  std::uint32_t cutoff() const noexcept { return cutoff_; }
  /// Co-consideration counts n_ij over unordered pairs with n_ij > 0.
  const std::map<NodePair, std::uint32_t>& pair_counts() const noexcept { return pair_counts_; }

  friend bool operator==(const CoConsiderationNetwork& a, const CoConsiderationNetwork& b) {
    return a.node_ids_ == b.node_ids_ && a.neighbors_ == b.neighbors_;
  }

 private:
  friend CoConsiderationNetwork build_network(std::span<const ConsiderationRecord>, std::span<const ProductRecord>,
                                              std::uint32_t);

  std::vector<std::string> node_ids_;
  std::vector<std::uint8_t> dense_;
  std::vector<std::vector<NodeIndex>> neighbors_;
  std::size_t edge_count_ = 0;
  std::uint32_t cutoff_ = 0;
  std::map<NodePair, std::uint32_t> pair_counts_;
};

/// Link (i,j) iff at least `cutoff` distinct customers considered both. Nodes follow
/// product-table order. Throws DataError on an unknown product id or cutoff == 0.
CoConsiderationNetwork build_network(std::span<const ConsiderationRecord> records,
                                     std::span<const ProductRecord> products, std::uint32_t cutoff = 1);

/// edges / (N(N-1)/2). Requires N >= 2.
double network_density(const CoConsiderationNetwork& network);

double mean_degree(const CoConsiderationNetwork& network);

struct LabeledPair {
  NodeIndex u = 0;
  NodeIndex v = 0;
  int label = 0;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct EdgeSplit {
  CoConsiderationNetwork training;  // full network minus test positives
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
  std::uint64_t seed = 0;
};

/// Holds out ceil(test_fraction * |E|) edges as test positives and draws disjoint,
/// class-balancing non-edges for test and train. Throws DataError when the graph has
/// fewer non-edges than edges.
EdgeSplit split_edges(const CoConsiderationNetwork& network, double test_fraction, std::uint64_t seed);

/// Approximate adjacency: each node links to its K most cosine-similar rows (ties to the
/// lower index), symmetrized by union.
CoConsiderationNetwork knn_adjacency(const FeatureMatrix& features, std::size_t k);

/// K = round(mean degree / 2), at least 1.
std::size_t choose_k(const CoConsiderationNetwork& training_network);

/// Edge list `u,v` using node ids, and a one-id-per-line node manifest.
std::string write_edge_list(const CoConsiderationNetwork& network);
std::string write_node_manifest(const CoConsiderationNetwork& network);
CoConsiderationNetwork read_network(std::string_view manifest, std::string_view edge_list);

}  // namespace gnnlink
