#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gnnlink/ingest.hpp"

namespace gnnlink {

struct SynthAttribute {
  std::string name;
  AttributeKind kind = AttributeKind::continuous;
  std::size_t cardinality = 0;  // categorical only
  double low = 0.0;             // continuous range
  double high = 1.0;
  double weight = 0.0;          // contribution to planted similarity; 0 = pure noise
};

struct SynthConfig {
  std::size_t products = 400;
  std::size_t products_year2 = 0;  // 0 = same as year 1
  std::vector<SynthAttribute> attributes;
  double temperature = 0.1;        // softmax temperature; 0 = deterministic top-rank picks
  std::size_t customers = 40000;   // per year
  std::size_t min_considered = 1;
  std::size_t max_considered = 3;
  double overlap = 0.74;           // fraction of year-1 products carried into year 2
  double drift = 0.05;             // max continuous shift, as a fraction of the range
  std::uint64_t seed = 0;

  /// Throws ConfigError on a degenerate configuration.
  void validate() const;

  /// 400 products, 8 attributes (one dominant categorical, two pure-noise attributes),
  /// tuned so the year-1 network at cutoff 1 has density near 0.15.
  static SynthConfig market_preset();
};

/// Weighted attribute agreement in [0,1]: categorical match scores 1, continuous
/// attributes score 1 - |difference| / range (floored at 0).
class PlantedRule {
 public:
  PlantedRule() = default;
  explicit PlantedRule(std::vector<SynthAttribute> attributes);

  double similarity(const ProductRecord& a, const ProductRecord& b) const;
  const std::vector<SynthAttribute>& attributes() const noexcept { return attributes_; }

 private:
  std::vector<SynthAttribute> attributes_;
  double total_weight_ = 0.0;
};

struct MarketYear {
  std::vector<ProductRecord> products;
  std::vector<ConsiderationRecord> records;  // first considered product is the seed pick
};

struct SyntheticMarket {
  AttributeSchema schema;
  MarketYear year1;
  MarketYear year2;
  PlantedRule rule;
  std::vector<std::string> new_products;  // year-2 ids absent from year 1
};

/// Each customer picks a seed product uniformly, then further distinct products with
/// probability proportional to exp(similarity / temperature).
SyntheticMarket generate_market(const SynthConfig& config);

/// Consideration records for `products` under `rule`; used for both market years.
std::vector<ConsiderationRecord> draw_considerations(std::span<const ProductRecord> products,
                                                     const PlantedRule& rule, const SynthConfig& config,
                                                     std::uint64_t stream, const std::string& customer_prefix);

/// `u,v,propensity` for every unordered product pair.
std::string write_truth(std::span<const ProductRecord> products, const PlantedRule& rule);

}  // namespace gnnlink
