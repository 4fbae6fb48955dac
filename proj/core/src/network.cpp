#include "gnnlink/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>
#include <unordered_map>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/random.hpp"

namespace gnnlink {

CoConsiderationNetwork::CoConsiderationNetwork(std::vector<std::string> node_ids, std::span<const NodePair> edges)
    : node_ids_(std::move(node_ids)) {
  const std::size_t n = node_ids_.size();
  dense_.assign(n * n, 0);
  neighbors_.resize(n);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw DataError("network: edge endpoint out of range");
    if (a == b) throw DataError("network: self-loop on '" + node_ids_[a] + "'");
    auto& cell = dense_[static_cast<std::size_t>(a) * n + b];
    if (cell) continue;
    cell = 1;
    dense_[static_cast<std::size_t>(b) * n + a] = 1;
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
    ++edge_count_;
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
}

std::optional<NodeIndex> CoConsiderationNetwork::index_of(std::string_view id) const {
  auto it = std::find(node_ids_.begin(), node_ids_.end(), id);
  if (it == node_ids_.end()) return std::nullopt;
  return static_cast<NodeIndex>(it - node_ids_.begin());
}

std::vector<NodePair> CoConsiderationNetwork::edges() const {
  std::vector<NodePair> out;
  out.reserve(edge_count_);
  for (NodeIndex u = 0; u < size(); ++u)
    for (NodeIndex v : neighbors_[u])
      if (u < v) out.emplace_back(u, v);
  return out;
}

CoConsiderationNetwork build_network(std::span<const ConsiderationRecord> records,
                                     std::span<const ProductRecord> products, std::uint32_t cutoff) {
  if (cutoff == 0) throw ConfigError("build_network: cutoff must be >= 1");
  std::vector<std::string> ids;
  std::unordered_map<std::string, NodeIndex> index;
  for (const auto& p : products) {
    index.emplace(p.product_id, static_cast<NodeIndex>(ids.size()));
    ids.push_back(p.product_id);
  }

  std::map<NodePair, std::uint32_t> counts;
  std::vector<NodeIndex> members;
  for (const auto& r : records) {
    members.clear();
    for (const auto& id : r.considered) {
      auto it = index.find(id);
      if (it == index.end()) throw DataError("build_network: unknown product '" + id + "'");
      members.push_back(it->second);
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) ++counts[{members[a], members[b]}];
  }

  std::vector<NodePair> edges;
  for (const auto& [pair, n] : counts)
    if (n >= cutoff) edges.push_back(pair);
  CoConsiderationNetwork net(std::move(ids), edges);
  net.cutoff_ = cutoff;
  net.pair_counts_ = std::move(counts);
  return net;
}

double network_density(const CoConsiderationNetwork& network) {
  const double n = static_cast<double>(network.size());
  if (network.size() < 2) throw DataError("network_density: need at least two nodes");
  return static_cast<double>(network.edge_count()) / (n * (n - 1.0) / 2.0);
}

double mean_degree(const CoConsiderationNetwork& network) {
  if (network.size() == 0) return 0.0;
  return 2.0 * static_cast<double>(network.edge_count()) / static_cast<double>(network.size());
}

EdgeSplit split_edges(const CoConsiderationNetwork& network, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("split_edges: test_fraction must be in (0,1)");
  const std::size_t n = network.size();
  const std::size_t total_pairs = n * (n - 1) / 2;
  const std::size_t edge_count = network.edge_count();
  if (edge_count == 0) throw DataError("split_edges: network has no edges");
  const std::size_t non_edges = total_pairs - edge_count;
  if (non_edges < edge_count)
    throw DataError("split_edges: network too dense to supply " + std::to_string(edge_count) +
                    " disjoint negatives (only " + std::to_string(non_edges) + " non-edges)");

  Rng rng(derive_seed(seed, {0x5e11u}));
  auto positives = network.edges();
  rng.shuffle(std::span(positives));
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(edge_count)));

  std::vector<NodePair> negatives;
  negatives.reserve(edge_count);
  if (2 * edge_count <= non_edges) {
    std::set<NodePair> taken;
    while (negatives.size() < edge_count) {
      const auto a = static_cast<NodeIndex>(rng.uniform_index(n));
      const auto b = static_cast<NodeIndex>(rng.uniform_index(n));
      if (a == b || network.has_edge(a, b)) continue;
      const auto key = make_pair_key(a, b);
      if (taken.insert(key).second) negatives.push_back(key);
    }
  } else {
    std::vector<NodePair> all;
    all.reserve(non_edges);
    for (NodeIndex a = 0; a < n; ++a)
      for (NodeIndex b = a + 1; b < n; ++b)
        if (!network.has_edge(a, b)) all.emplace_back(a, b);
    for (std::size_t i = 0; i < edge_count; ++i) {
      const std::size_t j = i + rng.uniform_index(all.size() - i);
      std::swap(all[i], all[j]);
      negatives.push_back(all[i]);
    }
  }

  EdgeSplit split;
  split.seed = seed;
  std::vector<NodePair> train_edges(positives.begin() + static_cast<std::ptrdiff_t>(n_test), positives.end());
  split.training = CoConsiderationNetwork(network.node_ids(), train_edges);
  for (std::size_t i = 0; i < n_test; ++i) split.test.push_back({positives[i].first, positives[i].second, 1});
  for (std::size_t i = 0; i < n_test; ++i) split.test.push_back({negatives[i].first, negatives[i].second, 0});
  for (const auto& [a, b] : train_edges) split.train.push_back({a, b, 1});
  for (std::size_t i = n_test; i < edge_count; ++i) split.train.push_back({negatives[i].first, negatives[i].second, 0});
  return split;
}

CoConsiderationNetwork knn_adjacency(const FeatureMatrix& features, std::size_t k) {
  const std::size_t n = features.rows();
  if (k < 1 || k >= n) throw ConfigError("knn_adjacency: K must satisfy 1 <= K < N");

  std::vector<std::vector<NodeIndex>> nearest(n);
  auto work = [&](std::size_t first, std::size_t last) {
    std::vector<std::pair<double, NodeIndex>> scored;
    for (std::size_t i = first; i < last; ++i) {
      scored.clear();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) scored.emplace_back(cosine_similarity(features, i, j), static_cast<NodeIndex>(j));
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                        [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
      for (std::size_t r = 0; r < k; ++r) nearest[i].push_back(scored[r].second);
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  if (threads == 1 || n < 256) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t first = t * chunk;
      const std::size_t last = std::min(n, first + chunk);
      if (first < last) pool.emplace_back(work, first, last);
    }
  }

  std::vector<NodePair> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (NodeIndex j : nearest[i]) edges.push_back(make_pair_key(static_cast<NodeIndex>(i), j));
  std::sort(edges.begin(), edges.end());
  return CoConsiderationNetwork(features.node_ids().empty() ? std::vector<std::string>(n) : features.node_ids(), edges);
}

std::size_t choose_k(const CoConsiderationNetwork& training_network) {
  if (training_network.size() == 0) throw DataError("choose_k: empty network");
  const long k = std::lround(mean_degree(training_network) / 2.0);
  return static_cast<std::size_t>(std::max(1L, k));
}

std::string write_edge_list(const CoConsiderationNetwork& network) {
  std::string out = "u,v\n";
  const auto& ids = network.node_ids();
  for (auto [a, b] : network.edges()) out += csv::join({ids[a], ids[b]}) + '\n';
  return out;
}

std::string write_node_manifest(const CoConsiderationNetwork& network) {
  std::string out;
  for (const auto& id : network.node_ids()) out += csv::escape(id) + '\n';
  return out;
}

CoConsiderationNetwork read_network(std::string_view manifest, std::string_view edge_list) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, NodeIndex> index;
  for (const auto& row : csv::parse(manifest)) {
    if (row.fields.size() != 1) throw ParseError("manifest: expected one id per line", row.line, "id");
    if (!index.emplace(row.fields[0], static_cast<NodeIndex>(ids.size())).second)
      throw DataError("manifest: duplicate node id '" + row.fields[0] + "'");
    ids.push_back(row.fields[0]);
  }
  std::vector<NodePair> edges;
  auto rows = csv::parse(edge_list);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && f.size() == 2 && f[0] == "u" && f[1] == "v") continue;
    if (f.size() != 2) throw ParseError("edge list: expected 'u,v'", rows[r].line, "u");
    auto a = index.find(f[0]);
    auto b = index.find(f[1]);
    if (a == index.end() || b == index.end())
      throw DataError("edge list: unknown node at line " + std::to_string(rows[r].line));
    edges.emplace_back(a->second, b->second);
  }
  return CoConsiderationNetwork(std::move(ids), edges);
}

}  // namespace gnnlink
