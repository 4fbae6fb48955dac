#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gnnlink/error.hpp"
#include "gnnlink/sage.hpp"
#include "gnnlink/synth.hpp"
#include "oracles.hpp"

using namespace gnnlink;

namespace {

CoConsiderationNetwork path3() {
  const std::vector<NodePair> e{{0, 1}, {1, 2}};
  return CoConsiderationNetwork({"a", "b", "c"}, e);
}

SageConfig small_config(std::size_t d, EdgeOperator op = EdgeOperator::inner_product) {
  SageConfig c;
  c.input_dim = d;
  c.hidden_dims = {4, 4};
  c.sample_sizes = {3, 2};
  c.dropout = 0.3;
  c.edge_operator = op;
  return c;
}

struct Instance {
  FeatureMatrix features;
  CoConsiderationNetwork graph;
  SageModel model;
  std::vector<LabeledPair> batch;
};

Instance random_instance(std::uint64_t seed, EdgeOperator op = EdgeOperator::inner_product) {
  Rng rng(seed);
  const std::size_t n = 4 + rng.uniform_index(7);
  const std::size_t d = 2 + rng.uniform_index(7);
  Instance in{oracle::random_features(n, d, rng), oracle::random_graph(n, 0.4, rng),
              SageModel::initialize(small_config(d, op), seed), {}};
  for (auto& p : in.model.parameters()) p += 0.1 * (rng.uniform() - 0.5);
  for (int i = 0; i < 6; ++i) {
    const auto u = static_cast<NodeIndex>(rng.uniform_index(n));
    auto v = static_cast<NodeIndex>(rng.uniform_index(n - 1));
    if (v >= u) ++v;
    in.batch.push_back({u, v, i % 2});
  }
  return in;
}

double norm(std::span<const double> z) {
  double s = 0;
  for (double x : z) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(SageConfig, ValidationAndEdgeDims) {
  SageConfig c;
  c.input_dim = 5;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.edge_dim(), 1u);
  c.edge_operator = EdgeOperator::hadamard;
  EXPECT_EQ(c.edge_dim(), 20u);
  c.edge_operator = EdgeOperator::concat;
  EXPECT_EQ(c.edge_dim(), 40u);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.dropout = 0.3;
  c.sample_sizes = {20};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(edge_operator_from_string("cosine"), ConfigError);
}

TEST(SageModel, GlorotInitAndLayout) {
  auto c = small_config(6);
  const auto m = SageModel::initialize(c, 3);
  const std::size_t expected = (4 * 12 + 4) + (4 * 8 + 4) + 1 + 1;
  EXPECT_EQ(m.parameter_count(), expected);
  const double a0 = std::sqrt(6.0 / (12 + 4));
  const auto l0 = m.layer(0);
  for (double w : l0.weights) EXPECT_LE(std::abs(w), a0);
  for (double b : l0.bias) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(m.classifier_bias(), 0.0);
  EXPECT_EQ(SageModel::initialize(c, 3), m);
  EXPECT_NE(SageModel::initialize(c, 4), m);
}

TEST(SageModel, SerializeRoundTripIsBitExact) {
  auto m = SageModel::initialize(small_config(5, EdgeOperator::hadamard), 8);
  m.metadata()["schema_hash"] = "abc";
  const auto back = SageModel::deserialize(m.serialize());
  EXPECT_EQ(back, m);
  EXPECT_THROW(SageModel::deserialize("gnnlink-model,99\n"), DataError);
}

TEST(SampleNeighborhood, SingleNeighborAndIsolated) {
  const std::vector<NodePair> e{{0, 1}};
  const CoConsiderationNetwork g({"a", "b", "c"}, e);
  Rng rng(1);
  const std::vector<std::size_t> sizes{20, 10};
  const auto s = sample_neighborhood(g, 0, sizes, rng);
  ASSERT_EQ(s.levels.size(), 3u);
  EXPECT_EQ(s.levels[1], std::vector<NodeIndex>(20, 1));
  EXPECT_EQ(s.levels[2], std::vector<NodeIndex>(200, 0));
  const auto iso = sample_neighborhood(g, 2, sizes, rng);
  EXPECT_EQ(iso.levels[1], std::vector<NodeIndex>(20, 2));
}

TEST(SampleNeighborhood, UniformChiSquare) {
  const std::vector<NodePair> e{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const CoConsiderationNetwork g({"a", "b", "c", "d", "e"}, e);
  Rng rng(99);
  const std::vector<std::size_t> sizes{20};
  std::vector<double> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto s = sample_neighborhood(g, 0, sizes, rng);
    for (auto v : s.levels[1]) counts[v] += 1;
  }
  EXPECT_EQ(counts[0], 0);
  const double expected = 100000.0 / 4;
  double chi2 = 0;
  for (int v = 1; v < 5; ++v) chi2 += (counts[v] - expected) * (counts[v] - expected) / expected;
  EXPECT_LT(chi2, 16.27);  // 3 dof, p = 0.001
}

TEST(Embed, HandComputedOneLayerPath) {
  SageConfig c;
  c.input_dim = 2;
  c.hidden_dims = {2};
  c.sample_sizes = {2};
  c.dropout = 0.0;
  SageModel m(c);
  auto l = m.layer(0);
  // W = [I | I]: self plus neighbor mean.
  l.weight(0, 0) = 1;
  l.weight(1, 1) = 1;
  l.weight(0, 2) = 1;
  l.weight(1, 3) = 1;
  FeatureMatrix f(3, 2);
  f(0, 0) = 1;                // a = (1, 0)
  f(1, 1) = 1;                // b = (0, 1)
  f(2, 0) = 1, f(2, 1) = 1;   // c = (1, 1)
  const std::vector<NeighborhoodSample> samples{{{{1}, {0, 2}}}, {{{0}, {1, 1}}}};
  const auto z = embed_samples(m, f, samples);
  // b: (0,1) + mean((1,0),(1,1)) = (1, 1.5)
  const double nb = std::sqrt(1.0 + 2.25);
  EXPECT_NEAR(z.row(0)[0], 1.0 / nb, 1e-15);
  EXPECT_NEAR(z.row(0)[1], 1.5 / nb, 1e-15);
  // a: (1,0) + (0,1) = (1,1)
  EXPECT_NEAR(z.row(1)[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(z.row(1)[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(z.degenerate, 0u);

  l.bias[0] = -10;
  l.bias[1] = -10;
  const auto dead = embed_samples(m, f, samples);
  EXPECT_EQ(dead.degenerate, 2u);
  for (double v : dead.values) EXPECT_EQ(v, 0.0);
}

TEST(Embed, UnitNormAndEvalDeterminism) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = random_instance(seed);
    const auto z = node_embeddings(in.model, in.features, in.graph, 5);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      const double n = norm(z.row(i));
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) <= 1e-6) << n;
    }
    EXPECT_EQ(node_embeddings(in.model, in.features, in.graph, 5), z);
  }
}

TEST(Embed, TrainModeAppliesDropout) {
  auto in = random_instance(4);
  std::vector<NodeIndex> nodes(in.graph.size());
  std::iota(nodes.begin(), nodes.end(), 0);
  Rng r1(3), r2(3);
  const auto eval = forward_embed(in.model, in.features, in.graph, nodes, r1, Mode::eval);
  const auto train = forward_embed(in.model, in.features, in.graph, nodes, r2, Mode::train);
  EXPECT_NE(eval.values, train.values);
}

TEST(Embed, NeighborOrderDoesNotMatter) {
  auto in = random_instance(11);
  Rng rng(2);
  const auto sizes = in.model.config().sample_sizes;
  for (NodeIndex v = 0; v < in.graph.size(); ++v) {
    const auto s = sample_neighborhood(in.graph, v, sizes, rng);
    // Reverse the root's children together with their subtrees, and each child's block.
    NeighborhoodSample t = s;
    const std::size_t s1 = sizes[0], s2 = sizes[1];
    for (std::size_t c = 0; c < s1; ++c) {
      t.levels[1][c] = s.levels[1][s1 - 1 - c];
      for (std::size_t g = 0; g < s2; ++g) t.levels[2][c * s2 + g] = s.levels[2][(s1 - 1 - c) * s2 + (s2 - 1 - g)];
    }
    const std::vector<NeighborhoodSample> a{s}, b{t};
    EXPECT_EQ(embed_samples(in.model, in.features, a).values, embed_samples(in.model, in.features, b).values);
  }
}

TEST(EdgeProbability, ZeroClassifierGivesHalf) {
  auto m = SageModel::initialize(small_config(3), 1);
  for (auto& w : m.classifier_weights()) w = 0;
  const std::vector<double> z{0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(edge_probability(m, z, z), 0.5);
}

TEST(EdgeProbability, SymmetricOperators) {
  Rng rng(6);
  for (auto op : {EdgeOperator::inner_product, EdgeOperator::hadamard, EdgeOperator::average}) {
    auto m = SageModel::initialize(small_config(3, op), 2);
    for (auto& w : m.classifier_weights()) w = rng.uniform() - 0.5;
    for (int t = 0; t < 50; ++t) {
      std::vector<double> a(4), b(4);
      for (auto& x : a) x = rng.uniform();
      for (auto& x : b) x = rng.uniform();
      EXPECT_EQ(edge_probability(m, a, b), edge_probability(m, b, a));
    }
  }
}

TEST(EdgeProbability, InnerProductOfIdenticalUnitVectorsIsMaximal) {
  auto m = SageModel::initialize(small_config(3), 2);
  const std::vector<double> u{0.5, 0.5, 0.5, 0.5}, w{1, 0, 0, 0};
  EXPECT_EQ(edge_embedding(m, u, u)[0], 1.0);
  EXPECT_LT(edge_embedding(m, u, w)[0], 1.0);
}

TEST(Bce, KnownValuesAndClamp) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(1.0 - kProbabilityEpsilon, 1), 0.0, 1e-6);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_NEAR(bce_loss(0.0, 1), -std::log(kProbabilityEpsilon), 1e-9);
}

TEST(Bce, BatchMeanMatchesExtendedPrecision) {
  Rng rng(12);
  double mean = 0;
  long double ref = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const double p = rng.uniform();
    const int y = static_cast<int>(rng.uniform_index(2));
    mean += bce_loss(p, y) / n;
    const long double q = std::clamp<long double>(p, kProbabilityEpsilon, 1 - kProbabilityEpsilon);
    ref += -(y ? std::log(q) : std::log(1 - q)) / n;
  }
  EXPECT_NEAR(mean, static_cast<double>(ref), 1e-10);
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (auto op : {EdgeOperator::inner_product, EdgeOperator::hadamard, EdgeOperator::concat}) {
      auto in = random_instance(100 + seed, op);
      Rng rng(seed);
      const auto frozen = sample_batch(in.model, in.graph, in.batch, rng);
      const auto check = oracle::check_gradient(in.model, in.features, frozen, in.batch);
      EXPECT_LT(check.max_relative_error, 1e-4) << "seed " << seed << " op " << to_string(op);
    }
  }
}

TEST(Gradient, LossAgreesWithExtendedLoss) {
  auto in = random_instance(5);
  Rng rng(1);
  const auto frozen = sample_batch(in.model, in.graph, in.batch, rng);
  const std::vector<long double> theta(in.model.parameters().begin(), in.model.parameters().end());
  const double loss = batch_loss(in.model, in.features, frozen, in.batch);
  EXPECT_NEAR(loss, static_cast<double>(batch_loss_extended(in.model, theta, in.features, frozen, in.batch)), 1e-12);
  EXPECT_NEAR(batch_gradient(in.model, in.features, frozen, in.batch).loss, loss, 1e-12);
}

TEST(Gradient, ZeroModelBalancedBatchHasZeroBiasGradient) {
  auto in = random_instance(3);
  for (auto& p : in.model.parameters()) p = 0;
  Rng rng(1);
  const auto g = parameter_gradients(in.model, in.features, in.graph, in.batch, rng, Mode::eval);
  EXPECT_EQ(g.gradient.back(), 0.0);
  EXPECT_NEAR(g.loss, std::log(2.0), 1e-15);
}

TEST(Gradient, DuplicatedBatchHasSameMean) {
  auto in = random_instance(7);
  Rng rng(1);
  const auto frozen = sample_batch(in.model, in.graph, in.batch, rng);
  auto batch2 = in.batch;
  batch2.insert(batch2.end(), in.batch.begin(), in.batch.end());
  FrozenBatch frozen2 = frozen;
  frozen2.heads.insert(frozen2.heads.end(), frozen.heads.begin(), frozen.heads.end());
  frozen2.tails.insert(frozen2.tails.end(), frozen.tails.begin(), frozen.tails.end());
  const auto g1 = batch_gradient(in.model, in.features, frozen, in.batch).gradient;
  const auto g2 = batch_gradient(in.model, in.features, frozen2, batch2).gradient;
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-14 + 1e-12 * std::abs(g1[i]));
}

TEST(Gradient, DropoutMaskIsSeeded) {
  auto in = random_instance(9);
  Rng rng(1);
  const auto frozen = sample_batch(in.model, in.graph, in.batch, rng);
  Rng d1(5), d2(5), d3(6);
  const auto a = batch_gradient(in.model, in.features, frozen, in.batch, &d1).gradient;
  EXPECT_EQ(a, batch_gradient(in.model, in.features, frozen, in.batch, &d2).gradient);
  EXPECT_NE(a, batch_gradient(in.model, in.features, frozen, in.batch, &d3).gradient);
}

namespace {

struct PlantedData {
  FeatureMatrix features;
  EdgeSplit split;
};

PlantedData planted(std::uint64_t seed) {
  auto c = SynthConfig::market_preset();
  c.products = 80;
  c.customers = 2000;
  c.seed = seed;
  const auto market = generate_market(c);
  const auto net = build_network(market.year1.records, market.year1.products);
  const auto codec = fit_codec(market.year1.products, market.schema);
  return {encode_features(codec, market.year1.products).matrix, split_edges(net, 0.1, seed)};
}

}  // namespace

TEST(Train, ZeroLearningRateIsIdentity) {
  const auto data = planted(1);
  SageConfig c;
  c.input_dim = data.features.cols();
  const auto init = SageModel::initialize(c, 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.learning_rate = 0.0;
  const auto out = train(init, data.features, data.split, tc);
  EXPECT_EQ(out.model.parameters().size(), init.parameters().size());
  EXPECT_TRUE(std::equal(init.parameters().begin(), init.parameters().end(), out.model.parameters().begin()));
  EXPECT_EQ(out.trace.epoch_loss.size(), 1u);
}

TEST(Train, DeterministicAndLearns) {
  const auto data = planted(2);
  SageConfig c;
  c.input_dim = data.features.cols();
  const auto init = SageModel::initialize(c, 2);
  TrainConfig tc;
  tc.epochs = 6;
  tc.seed = 2;
  tc.track_held_out_auc = true;
  const auto a = train(init, data.features, data.split, tc);
  const auto b = train(init, data.features, data.split, tc);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.trace.epoch_loss.size(), 6u);
  EXPECT_EQ(a.trace.held_out_auc.size(), 6u);
  EXPECT_LT(a.trace.epoch_loss.back(), a.trace.epoch_loss.front());
}

TEST(Train, OverflowRaisesNumericError) {
  // A too-large step only stalls training: ReLU, normalization and the clamped loss keep
  // every value finite. Overflowing pre-activations are what produce NaN.
  const auto data = planted(3);
  FeatureMatrix huge(data.features.rows(), data.features.cols());
  for (std::size_t i = 0; i < huge.rows(); ++i)
    for (std::size_t j = 0; j < huge.cols(); ++j) huge(i, j) = 1e308;
  SageConfig c;
  c.input_dim = huge.cols();
  auto init = SageModel::initialize(c, 3);
  for (auto& w : init.parameters()) w = 1.0;
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(init, huge, data.split, tc), NumericError);
  const std::vector<NodePair> pair{{0, 1}};
  EXPECT_THROW(predict_links(init, huge, data.split.training, pair, 1), NumericError);
}

TEST(Predict, FiveNodeAllPairs) {
  Rng rng(4);
  const auto f = oracle::random_features(5, 3, rng);
  const std::vector<NodePair> e{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  const CoConsiderationNetwork g({"a", "b", "c", "d", "e"}, e);
  SageConfig c = small_config(3);
  const auto m = SageModel::initialize(c, 4);
  std::vector<NodePair> pairs, reversed;
  for (NodeIndex i = 0; i < 5; ++i)
    for (NodeIndex j = i + 1; j < 5; ++j) {
      pairs.push_back({i, j});
      reversed.push_back({j, i});
    }
  const auto p = predict_links(m, f, g, pairs, 1);
  ASSERT_EQ(p.size(), 10u);
  for (double x : p) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_EQ(predict_links(m, f, g, reversed, 1), p);
  EXPECT_EQ(predict_links(m, f, g, pairs, 1), p);
  const std::vector<NodePair> bad{{0, 7}};
  EXPECT_THROW(predict_links(m, f, g, bad, 1), DataError);
}

TEST(Predict, NewNodeScoredThroughKnnAdjacency) {
  Rng rng(8);
  const auto f = oracle::random_features(12, 4, rng);
  const auto m = SageModel::initialize(small_config(4), 8);
  const auto g = knn_adjacency(f, 3);
  const std::vector<NodePair> pairs{{0, 11}, {5, 11}};
  const auto p = predict_links(m, f, g, pairs, 2);
  for (double x : p) EXPECT_TRUE(x > 0.0 && x < 1.0);
}
