#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnnlink/encode.hpp"
#include "gnnlink/network.hpp"
#include "gnnlink/random.hpp"
#include "gnnlink/sage.hpp"

namespace gnnlink {

/// Copy of `features` whose column block for `attribute` has been row-shuffled with one
/// permutation, so one-hot rows move intact. Throws DataError for an unknown attribute.
FeatureMatrix permute_attribute_block(const FeatureMatrix& features, std::span<const AttributeBlock> blocks,
                                      std::string_view attribute, Rng& rng);

struct AttributeImportance {
  std::string attribute;
  AttributeKind kind = AttributeKind::continuous;
  double mean = 0.0;
  double stddev = 0.0;            // sample standard deviation over repeats
  std::vector<double> samples;    // 1 - s_kj / s, one per repeat
};

struct ImportanceReport {
  std::string score_kind = "auc";
  double reference_score = 0.0;
  std::size_t repeats = 0;
  std::vector<AttributeImportance> attributes;  // schema order

  /// Indices into `attributes` by descending mean importance (ties by schema order).
  std::vector<std::size_t> ranking() const;
};

struct ImportanceOptions {
  std::size_t repeats = 50;
  std::uint64_t seed = 0;          // drives the shuffles
  std::uint64_t sampling_seed = 0; // neighborhood sampling, shared by every evaluation
  std::size_t threads = 0;         // 0 = hardware concurrency
};

/// Permutation importance of every attribute block, scored by AUC over `pairs`.
/// Throws DataError when the reference AUC is 0 or an input is inconsistent.
ImportanceReport permutation_importance(const SageModel& model, const FeatureMatrix& features,
                                        std::span<const AttributeBlock> blocks, const CoConsiderationNetwork& graph,
                                        std::span<const LabeledPair> pairs, const ImportanceOptions& options);

/// Ranked CSV: rank,attribute,kind,mean_importance,std,repeats.
std::string format_importance_table(const ImportanceReport& report);

}  // namespace gnnlink
