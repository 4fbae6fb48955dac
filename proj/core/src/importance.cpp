#include "gnnlink/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/metrics.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

/// Neumaier-compensated sum; the inputs are always visited in repeat order.
double compensated_sum(std::span<const double> values) {
  double sum = 0.0, c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

double score_auc(const SageModel& model, const FeatureMatrix& features, const CoConsiderationNetwork& graph,
                 std::span<const NodePair> pairs, std::span<const int> labels, std::uint64_t sampling_seed) {
  const auto probs = predict_links(model, features, graph, pairs, sampling_seed);
  return roc_auc(labels, probs).auc;
}

}  // namespace

FeatureMatrix permute_attribute_block(const FeatureMatrix& features, std::span<const AttributeBlock> blocks,
                                      std::string_view attribute, Rng& rng) {
  auto it = std::find_if(blocks.begin(), blocks.end(), [&](const AttributeBlock& b) { return b.name == attribute; });
  if (it == blocks.end()) throw DataError("permute: unknown attribute '" + std::string(attribute) + "'");
  if (it->end > features.cols()) throw DataError("permute: block exceeds feature width");

  std::vector<std::size_t> perm(features.rows());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));

  FeatureMatrix out = features;
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = it->begin; j < it->end; ++j) out(i, j) = features(perm[i], j);
  return out;
}

std::vector<std::size_t> ImportanceReport::ranking() const {
  std::vector<std::size_t> order(attributes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return attributes[a].mean > attributes[b].mean; });
  return order;
}

ImportanceReport permutation_importance(const SageModel& model, const FeatureMatrix& features,
                                        std::span<const AttributeBlock> blocks, const CoConsiderationNetwork& graph,
                                        std::span<const LabeledPair> pairs, const ImportanceOptions& options) {
  if (options.repeats == 0) throw ConfigError("importance: repeats must be >= 1");
  std::vector<NodePair> node_pairs;
  std::vector<int> labels;
  for (const auto& p : pairs) {
    node_pairs.emplace_back(p.u, p.v);
    labels.push_back(p.label);
  }

  ImportanceReport report;
  report.repeats = options.repeats;
  report.reference_score = score_auc(model, features, graph, node_pairs, labels, options.sampling_seed);
  if (report.reference_score == 0.0) throw DataError("importance: reference score is 0; importance undefined");

  const std::size_t n_attr = blocks.size();
  report.attributes.resize(n_attr);
  for (std::size_t a = 0; a < n_attr; ++a) {
    report.attributes[a].attribute = blocks[a].name;
    report.attributes[a].kind = blocks[a].kind;
    report.attributes[a].samples.assign(options.repeats, 0.0);
  }

  // Each (attribute, repeat) task owns its shuffle stream and output slot, so results
  // do not depend on how tasks are scheduled.
  const std::size_t tasks = n_attr * options.repeats;
  auto run = [&](std::size_t t) {
    const std::size_t a = t / options.repeats;
    const std::size_t k = t % options.repeats;
    Rng rng(derive_seed(options.seed, {0x1a9u, a, k}));
    const auto corrupted = permute_attribute_block(features, blocks, blocks[a].name, rng);
    const double s = score_auc(model, corrupted, graph, node_pairs, labels, options.sampling_seed);
    report.attributes[a].samples[k] = 1.0 - s / report.reference_score;
  };

  std::size_t threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, tasks));
  if (threads == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < tasks; t += threads) run(t);
      });
  }

  for (auto& attr : report.attributes) {
    const double n = static_cast<double>(attr.samples.size());
    attr.mean = compensated_sum(attr.samples) / n;
    if (attr.samples.size() > 1) {
      std::vector<double> sq;
      for (double v : attr.samples) sq.push_back((v - attr.mean) * (v - attr.mean));
      attr.stddev = std::sqrt(compensated_sum(sq) / (n - 1.0));
    }
  }
  return report;
}

std::string format_importance_table(const ImportanceReport& report) {
  std::string out = "rank,attribute,kind,mean_importance,std,repeats\n";
  std::size_t rank = 1;
  for (std::size_t i : report.ranking()) {
    const auto& a = report.attributes[i];
    out += csv::join({std::to_string(rank++), a.attribute, std::string(to_string(a.kind)),
                      format_decimal(a.mean, 6), format_decimal(a.stddev, 6), std::to_string(report.repeats)}) +
           '\n';
  }
  return out;
}

}  // namespace gnnlink
