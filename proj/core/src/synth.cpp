#include "gnnlink/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/random.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

std::string numbered(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return prefix + buf;
}

ProductRecord draw_product(const std::string& id, const std::vector<SynthAttribute>& attrs, Rng& rng) {
  ProductRecord p;
  p.product_id = id;
  for (const auto& a : attrs) {
    if (a.kind == AttributeKind::continuous)
      p.attribute_values.emplace(a.name, rng.uniform(a.low, a.high));
    else
      p.attribute_values.emplace(a.name, a.name + "_" + std::to_string(rng.uniform_index(a.cardinality)));
  }
  return p;
}

}  // namespace

void SynthConfig::validate() const {
  if (products < 2) throw ConfigError("synth: need at least two products");
  if (customers == 0) throw ConfigError("synth: zero customers");
  if (min_considered < 1 || max_considered < min_considered)
    throw ConfigError("synth: considerations per customer must satisfy 1 <= min <= max");
  if (max_considered > products) throw ConfigError("synth: max considerations exceed product count");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("synth: overlap must be in [0,1]");
  if (!(temperature >= 0.0)) throw ConfigError("synth: temperature must be >= 0");
  if (!(drift >= 0.0)) throw ConfigError("synth: drift must be >= 0");
  if (attributes.empty()) throw ConfigError("synth: no attributes");
  bool signal = false;
  for (const auto& a : attributes) {
    if (a.weight < 0.0) throw ConfigError("synth: negative weight for '" + a.name + "'");
    signal = signal || a.weight > 0.0;
    if (a.kind == AttributeKind::categorical && a.cardinality == 0)
      throw ConfigError("synth: categorical '" + a.name + "' needs cardinality >= 1");
    if (a.kind == AttributeKind::continuous && !(a.high > a.low))
      throw ConfigError("synth: continuous '" + a.name + "' needs high > low");
  }
  if (!signal) throw ConfigError("synth: at least one attribute needs a nonzero planted weight");
  const std::size_t year2 = products_year2 == 0 ? products : products_year2;
  if (static_cast<std::size_t>(std::llround(overlap * static_cast<double>(products))) > year2)
    throw ConfigError("synth: overlap exceeds the year-2 product count");
}

SynthConfig SynthConfig::market_preset() {
  SynthConfig c;
  c.products = 400;
  c.customers = 40000;
  c.temperature = 0.085;
  c.overlap = 0.74;
  c.drift = 0.05;
  c.attributes = {
      {"make", AttributeKind::categorical, 8, 0.0, 0.0, 3.0},
      {"segment", AttributeKind::categorical, 5, 0.0, 0.0, 1.0},
      {"bodytype", AttributeKind::categorical, 4, 0.0, 0.0, 0.5},
      {"price", AttributeKind::continuous, 0, 10.0, 80.0, 1.5},
      {"power", AttributeKind::continuous, 0, 60.0, 300.0, 0.5},
      {"fuel_consumption", AttributeKind::continuous, 0, 4.0, 15.0, 0.5},
      {"noise_level", AttributeKind::continuous, 0, 0.0, 1.0, 0.0},
      {"trim_code", AttributeKind::categorical, 3, 0.0, 0.0, 0.0},
  };
  return c;
}

PlantedRule::PlantedRule(std::vector<SynthAttribute> attributes) : attributes_(std::move(attributes)) {
  for (const auto& a : attributes_) total_weight_ += a.weight;
  if (!(total_weight_ > 0.0)) throw ConfigError("planted rule: all weights are zero");
}

double PlantedRule::similarity(const ProductRecord& a, const ProductRecord& b) const {
  double s = 0.0;
  for (const auto& attr : attributes_) {
    if (attr.weight == 0.0) continue;
    double agree = 0.0;
    if (attr.kind == AttributeKind::categorical) {
      agree = a.category(attr.name) == b.category(attr.name) ? 1.0 : 0.0;
    } else {
      const double d = std::abs(a.number(attr.name) - b.number(attr.name)) / (attr.high - attr.low);
      agree = std::max(0.0, 1.0 - d);
    }
    s += attr.weight * agree;
  }
  return s / total_weight_;
}

std::vector<ConsiderationRecord> draw_considerations(std::span<const ProductRecord> products,
                                                     const PlantedRule& rule, const SynthConfig& config,
                                                     std::uint64_t stream, const std::string& customer_prefix) {
  const std::size_t n = products.size();
  if (config.max_considered > n) throw ConfigError("synth: more considerations than products");
  Rng rng(derive_seed(config.seed, {0xc057u, stream}));

  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sim[i * n + j] = sim[j * n + i] = rule.similarity(products[i], products[j]);

  // Per seed: cumulative softmax weights over the other products, or a rank order when
  // the temperature is zero.
  const bool greedy = config.temperature == 0.0;
  std::vector<double> cumulative;
  std::vector<std::size_t> ranked;
  if (greedy) {
    ranked.resize(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
      auto* row = ranked.data() + i * (n - 1);
      std::size_t w = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) row[w++] = j;
      std::stable_sort(row, row + (n - 1), [&](std::size_t a, std::size_t b) { return sim[i * n + a] > sim[i * n + b]; });
    }
  } else {
    cumulative.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      double top = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) top = std::max(top, sim[i * n + j]);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) acc += std::exp((sim[i * n + j] - top) / config.temperature);
        cumulative[i * n + j] = acc;
      }
    }
  }

  std::vector<ConsiderationRecord> records;
  records.reserve(config.customers);
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < config.customers; ++c) {
    const std::size_t m = config.min_considered + rng.uniform_index(config.max_considered - config.min_considered + 1);
    const std::size_t seed_product = rng.uniform_index(n);
    picked.assign(1, seed_product);
    if (greedy) {
      const auto* row = ranked.data() + seed_product * (n - 1);
      for (std::size_t r = 0; picked.size() < m; ++r) picked.push_back(row[r]);
    } else {
      const double* cum = cumulative.data() + seed_product * n;
      const double total = cum[n - 1];
      while (picked.size() < m) {
        const double u = rng.uniform() * total;
        auto j = static_cast<std::size_t>(std::upper_bound(cum, cum + n, u) - cum);
        if (j >= n || j == seed_product) continue;
        if (std::find(picked.begin(), picked.end(), j) == picked.end()) picked.push_back(j);
      }
    }
    ConsiderationRecord rec{numbered(customer_prefix, c + 1), {}};
    for (auto p : picked) rec.considered.push_back(products[p].product_id);
    records.push_back(std::move(rec));
  }
  return records;
}

SyntheticMarket generate_market(const SynthConfig& config) {
  config.validate();
  SyntheticMarket market;
  for (const auto& a : config.attributes) market.schema.add(a.name, a.kind);
  market.rule = PlantedRule(config.attributes);

  Rng product_rng(derive_seed(config.seed, {0x9e0du}));
  for (std::size_t i = 0; i < config.products; ++i)
    market.year1.products.push_back(draw_product(numbered("P", i + 1), config.attributes, product_rng));

  const std::size_t n2 = config.products_year2 == 0 ? config.products : config.products_year2;
  const auto shared = static_cast<std::size_t>(std::llround(config.overlap * static_cast<double>(config.products)));
  std::vector<std::size_t> carried(config.products);
  for (std::size_t i = 0; i < carried.size(); ++i) carried[i] = i;
  Rng year2_rng(derive_seed(config.seed, {0x2002u}));
  year2_rng.shuffle(std::span(carried));
  carried.resize(shared);
  std::sort(carried.begin(), carried.end());
  for (std::size_t i : carried) {
    ProductRecord p = market.year1.products[i];
    for (const auto& a : config.attributes) {
      if (a.kind != AttributeKind::continuous) continue;
      auto& v = std::get<double>(p.attribute_values.find(a.name)->second);
      v += year2_rng.uniform(-config.drift, config.drift) * (a.high - a.low);
    }
    market.year2.products.push_back(std::move(p));
  }
  for (std::size_t i = shared; i < n2; ++i) {
    auto p = draw_product(numbered("N", i - shared + 1), config.attributes, year2_rng);
    market.new_products.push_back(p.product_id);
    market.year2.products.push_back(std::move(p));
  }

  market.year1.records = draw_considerations(market.year1.products, market.rule, config, 1, "C1-");
  market.year2.records = draw_considerations(market.year2.products, market.rule, config, 2, "C2-");
  return market;
}

std::string write_truth(std::span<const ProductRecord> products, const PlantedRule& rule) {
  std::string out = "u,v,propensity\n";
  for (std::size_t i = 0; i < products.size(); ++i)
    for (std::size_t j = i + 1; j < products.size(); ++j)
      out += csv::join({products[i].product_id, products[j].product_id,
                        format_decimal(rule.similarity(products[i], products[j]), 6)}) +
             '\n';
  return out;
}

}  // namespace gnnlink
