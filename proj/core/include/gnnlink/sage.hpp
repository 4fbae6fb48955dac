#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnnlink/encode.hpp"
#include "gnnlink/network.hpp"
#include "gnnlink/random.hpp"

namespace gnnlink {

/// How two node embeddings combine into an edge embedding.
enum class EdgeOperator { inner_product, hadamard, average, concat };
enum class Aggregator { mean };
enum class Mode { train, eval };

std::string_view to_string(EdgeOperator op);
EdgeOperator edge_operator_from_string(std::string_view text);

inline constexpr double kProbabilityEpsilon = 1e-7;

struct SageConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{20, 20};  // one entry per layer
  std::vector<std::size_t> sample_sizes{20, 10};  // neighbors drawn per hop
  double dropout = 0.3;
  EdgeOperator edge_operator = EdgeOperator::inner_product;
  Aggregator aggregator = Aggregator::mean;

  std::size_t depth() const noexcept { return hidden_dims.size(); }
  std::size_t embedding_dim() const noexcept { return hidden_dims.empty() ? 0 : hidden_dims.back(); }
  std::size_t edge_dim() const noexcept;
  /// Throws ConfigError on inconsistent shapes or an out-of-range dropout.
  void validate() const;

  friend bool operator==(const SageConfig&, const SageConfig&) = default;
};

/// Read/write view of one layer's parameters. The weight matrix is out x (2 in) over
/// concat(self, neighbor aggregate); storage is column-major (one column per input).
template <class Span>
struct LayerView {
  Span weights;  // weights[j * out + o] == W(o, j)
  Span bias;     // out
  std::size_t out = 0;
  std::size_t in = 0;  // 2 * previous dim

  auto& weight(std::size_t o, std::size_t j) const { return weights[j * out + o]; }
};

/// Depth-L GraphSAGE encoder with a dense link classifier over the edge embedding.
/// All parameters live in one flat vector so optimizers and gradient checks can treat
/// them uniformly; gradients share the same layout.
class SageModel {
 public:
  explicit SageModel(SageConfig config);

  /// Glorot-uniform weights, zero biases.
  static SageModel initialize(SageConfig config, std::uint64_t seed);

  const SageConfig& config() const noexcept { return config_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  LayerView<std::span<double>> layer(std::size_t k);
  LayerView<std::span<const double>> layer(std::size_t k) const;
  std::span<double> classifier_weights();
  std::span<const double> classifier_weights() const;
  double& classifier_bias() { return params_.back(); }
  double classifier_bias() const { return params_.back(); }

  /// Offsets into parameters(): layer k weights, layer k bias, classifier weights.
  std::size_t weight_offset(std::size_t k) const { return weight_offsets_[k]; }
  std::size_t bias_offset(std::size_t k) const { return bias_offsets_[k]; }
  std::size_t classifier_offset() const noexcept { return classifier_offset_; }

  /// Free-form provenance carried through serialization (schema hash, seed, ...).
  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  /// Versioned text document; parameters are hex floats so round-trips are bit-exact.
  std::string serialize() const;
  static SageModel deserialize(std::string_view text);

  friend bool operator==(const SageModel&, const SageModel&) = default;

 private:
  SageConfig config_;
  std::vector<double> params_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::size_t classifier_offset_ = 0;
  std::map<std::string, std::string> metadata_;
};

/// Sampled computation tree. levels[0] = {root}; every entry of levels[l] owns
/// sizes[l] consecutive children in levels[l + 1].
struct NeighborhoodSample {
  std::vector<std::vector<NodeIndex>> levels;

  friend bool operator==(const NeighborhoodSample&, const NeighborhoodSample&) = default;
};

/// Uniform sampling with replacement per hop; an isolated node samples itself.
NeighborhoodSample sample_neighborhood(const CoConsiderationNetwork& graph, NodeIndex v,
                                       std::span<const std::size_t> sizes, Rng& rng);

/// Row-major embeddings, one row per requested node.
struct Embeddings {
  std::size_t dim = 0;
  std::vector<double> values;
  std::size_t degenerate = 0;  // rows that normalized to the zero vector

  std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  friend bool operator==(const Embeddings&, const Embeddings&) = default;
};

/// Samples a neighborhood for each node from `rng` (in order) and embeds it. Train mode
/// applies inverted dropout to every layer input using the same generator.
Embeddings forward_embed(const SageModel& model, const FeatureMatrix& features, const CoConsiderationNetwork& graph,
                         std::span<const NodeIndex> nodes, Rng& rng, Mode mode);

/// Eval-mode embeddings of pre-drawn samples. Output does not depend on the order of
/// any node's sampled neighbor list.
Embeddings embed_samples(const SageModel& model, const FeatureMatrix& features,
                         std::span<const NeighborhoodSample> samples);

/// Eval-mode embedding of every node, each with its own sampling stream derived from
/// (seed, node index). Identical seeds give identical embeddings.
Embeddings node_embeddings(const SageModel& model, const FeatureMatrix& features,
                           const CoConsiderationNetwork& graph, std::uint64_t seed);

std::vector<double> edge_embedding(const SageModel& model, std::span<const double> z_u, std::span<const double> z_v);
double edge_probability(const SageModel& model, std::span<const double> z_u, std::span<const double> z_v);

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int label);

/// Neighborhood samples for both endpoints of every pair in a batch.
struct FrozenBatch {
  std::vector<NeighborhoodSample> heads;
  std::vector<NeighborhoodSample> tails;
};

FrozenBatch sample_batch(const SageModel& model, const CoConsiderationNetwork& graph,
                         std::span<const LabeledPair> batch, Rng& rng);

/// Mean BCE over the batch, eval mode, at the model's parameters.
double batch_loss(const SageModel& model, const FeatureMatrix& features, const FrozenBatch& samples,
                  std::span<const LabeledPair> batch);

/// Same loss evaluated in long double at an arbitrary parameter vector (model layout).
long double batch_loss_extended(const SageModel& model, std::span<const long double> parameters,
                                const FeatureMatrix& features, const FrozenBatch& samples,
                                std::span<const LabeledPair> batch);

struct BatchGradient {
  std::vector<double> gradient;  // same layout as SageModel::parameters()
  double loss = 0.0;             // mean BCE of the batch
};

/// Analytic gradient of the mean batch BCE. Passing a generator enables dropout with a
/// mask drawn from it; nullptr evaluates without dropout.
BatchGradient batch_gradient(const SageModel& model, const FeatureMatrix& features, const FrozenBatch& samples,
                             std::span<const LabeledPair> batch, Rng* dropout_rng = nullptr);

/// Draws fresh neighborhoods (and a dropout mask in train mode) and returns the gradient.
BatchGradient parameter_gradients(const SageModel& model, const FeatureMatrix& features,
                                  const CoConsiderationNetwork& graph, std::span<const LabeledPair> batch, Rng& rng,
                                  Mode mode = Mode::train);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 20;
  double learning_rate = 0.02;
  std::uint64_t seed = 0;
  bool track_held_out_auc = false;
};

struct LossTrace {
  std::vector<double> epoch_loss;
  std::vector<double> held_out_auc;  // empty unless tracked

  friend bool operator==(const LossTrace&, const LossTrace&) = default;
};

struct TrainResult {
  SageModel model;
  LossTrace trace;
};

/// Minibatch SGD over split.train on the split's training adjacency. Throws
/// NumericError on a non-finite loss.
TrainResult train(SageModel model, const FeatureMatrix& features, const EdgeSplit& split, const TrainConfig& config);

/// Eval-mode link probabilities. Works on any graph whose feature rows match the model
/// input dimension, including KNN-approximated networks of unseen products.
std::vector<double> predict_links(const SageModel& model, const FeatureMatrix& features,
                                  const CoConsiderationNetwork& graph, std::span<const NodePair> pairs,
                                  std::uint64_t seed);

/// Scores pairs from precomputed node embeddings. Throws NumericError on a NaN score.
std::vector<double> score_pairs(const SageModel& model, const Embeddings& embeddings, std::span<const NodePair> pairs);

}  // namespace gnnlink
