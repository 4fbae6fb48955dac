#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "gnnlink/error.hpp"
#include "gnnlink/importance.hpp"
#include "oracles.hpp"

using namespace gnnlink;

namespace {

struct Setup {
  FeatureCodec codec;
  FeatureMatrix features;
  CoConsiderationNetwork graph;
  SageModel model;
  std::vector<LabeledPair> pairs;
};

Setup make_setup(std::uint64_t seed) {
  Rng rng(seed);
  auto products = oracle::make_products(30, rng);
  for (auto& p : products) p.attribute_values.emplace("flat", 3.0);
  auto schema = oracle::small_schema();
  schema.add("flat", AttributeKind::continuous);
  auto codec = fit_codec(products, schema);
  auto features = encode_features(codec, products).matrix;
  auto graph = oracle::random_graph(30, 0.2, rng);
  SageConfig c;
  c.input_dim = features.cols();
  c.hidden_dims = {6, 6};
  c.sample_sizes = {4, 3};
  auto model = SageModel::initialize(c, seed);
  const auto split = split_edges(graph, 0.2, seed);
  return {codec, features, graph, model, split.test};
}

void zero_input_columns(SageModel& m, const AttributeBlock& b) {
  auto l = m.layer(0);
  const std::size_t in = l.in / 2;
  for (std::size_t o = 0; o < l.out; ++o)
    for (std::size_t j = b.begin; j < b.end; ++j) {
      l.weight(o, j) = 0.0;
      l.weight(o, in + j) = 0.0;
    }
}

}  // namespace

TEST(Permute, MovesWholeRowsOfOneBlock) {
  auto s = make_setup(1);
  Rng rng(4);
  const auto out = permute_attribute_block(s.features, s.codec.blocks(), "make", rng);
  const auto& b = s.codec.block("make");
  std::multiset<std::vector<double>> before, after;
  for (std::size_t i = 0; i < s.features.rows(); ++i) {
    std::vector<double> r0, r1;
    for (std::size_t j = 0; j < s.features.cols(); ++j) {
      if (j >= b.begin && j < b.end) {
        r0.push_back(s.features(i, j));
        r1.push_back(out(i, j));
      } else {
        EXPECT_EQ(out(i, j), s.features(i, j));
      }
    }
    double sum = 0;
    for (double v : r1) sum += v;
    EXPECT_TRUE(sum == 0.0 || sum == 1.0);
    before.insert(r0);
    after.insert(r1);
  }
  EXPECT_EQ(before, after);
  EXPECT_THROW(permute_attribute_block(s.features, s.codec.blocks(), "colour", rng), DataError);
}

TEST(Importance, IgnoredAndConstantAttributesScoreExactlyZero) {
  auto s = make_setup(2);
  zero_input_columns(s.model, s.codec.block("price"));
  ImportanceOptions opt;
  opt.repeats = 10;
  opt.seed = 3;
  opt.sampling_seed = 4;
  opt.threads = 2;
  const auto r = permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, s.pairs, opt);
  ASSERT_EQ(r.attributes.size(), 3u);
  for (const auto& a : r.attributes) {
    ASSERT_EQ(a.samples.size(), 10u);
    if (a.attribute == "price" || a.attribute == "flat") {
      for (double v : a.samples) EXPECT_EQ(v, 0.0) << a.attribute;
      EXPECT_EQ(a.mean, 0.0);
      EXPECT_EQ(a.stddev, 0.0);
    }
  }
}

TEST(Importance, ThreadCountDoesNotChangeResult) {
  auto s = make_setup(3);
  ImportanceOptions opt;
  opt.repeats = 6;
  opt.seed = 9;
  opt.threads = 1;
  const auto one = permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, s.pairs, opt);
  opt.threads = 4;
  const auto four = permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, s.pairs, opt);
  ASSERT_EQ(one.attributes.size(), four.attributes.size());
  for (std::size_t i = 0; i < one.attributes.size(); ++i) EXPECT_EQ(one.attributes[i].samples, four.attributes[i].samples);
  EXPECT_EQ(format_importance_table(one), format_importance_table(four));
}

TEST(Importance, StatisticsAndRanking) {
  auto s = make_setup(4);
  ImportanceOptions opt;
  opt.repeats = 8;
  const auto r = permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, s.pairs, opt);
  for (const auto& a : r.attributes) {
    long double m = 0;
    for (double v : a.samples) m += v;
    m /= a.samples.size();
    long double ss = 0;
    for (double v : a.samples) ss += (v - m) * (v - m);
    EXPECT_NEAR(a.mean, static_cast<double>(m), 1e-15);
    EXPECT_NEAR(a.stddev, std::sqrt(static_cast<double>(ss / (a.samples.size() - 1))), 1e-12);
  }
  const auto rank = r.ranking();
  for (std::size_t i = 1; i < rank.size(); ++i) EXPECT_GE(r.attributes[rank[i - 1]].mean, r.attributes[rank[i]].mean);
  const auto table = format_importance_table(r);
  EXPECT_EQ(table.substr(0, table.find('\n')), "rank,attribute,kind,mean_importance,std,repeats");
}

TEST(Importance, Errors) {
  auto s = make_setup(5);
  ImportanceOptions opt;
  opt.repeats = 0;
  EXPECT_THROW(permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, s.pairs, opt), ConfigError);

  // Reference AUC of 0: label the lowest-scored pair positive and the highest negative.
  opt.repeats = 2;
  const auto z = node_embeddings(s.model, s.features, s.graph, opt.sampling_seed);
  std::vector<NodePair> all;
  for (NodeIndex i = 0; i < s.graph.size(); ++i)
    for (NodeIndex j = i + 1; j < s.graph.size(); ++j) all.push_back({i, j});
  const auto p = score_pairs(s.model, z, all);
  const auto lo = std::min_element(p.begin(), p.end()) - p.begin();
  const auto hi = std::max_element(p.begin(), p.end()) - p.begin();
  ASSERT_LT(p[lo], p[hi]);
  const std::vector<LabeledPair> reversed{{all[lo].first, all[lo].second, 1}, {all[hi].first, all[hi].second, 0}};
  EXPECT_THROW(permutation_importance(s.model, s.features, s.codec.blocks(), s.graph, reversed, opt), DataError);
}
