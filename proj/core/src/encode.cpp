#include "gnnlink/encode.hpp"

#include <algorithm>
#include <cmath>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

constexpr std::string_view kCodecMagic = "gnnlink-codec";
constexpr int kCodecVersion = 1;

}  // namespace

FeatureCodec::FeatureCodec(AttributeSchema schema, std::vector<Parameters> parameters)
    : schema_(std::move(schema)), parameters_(std::move(parameters)) {
  if (parameters_.size() != schema_.size()) throw DataError("codec: parameter count does not match schema");
  std::size_t column = 0;
  for (std::size_t a = 0; a < schema_.size(); ++a) {
    const auto& spec = schema_[a];
    std::size_t width = 0;
    if (spec.kind == AttributeKind::continuous) {
      if (!std::holds_alternative<ContinuousScaling>(parameters_[a]))
        throw DataError("codec: attribute '" + spec.name + "' expects continuous parameters");
      width = 1;
    } else {
      const auto* cats = std::get_if<CategoryList>(&parameters_[a]);
      if (cats == nullptr) throw DataError("codec: attribute '" + spec.name + "' expects categories");
      width = cats->categories.size();
    }
    blocks_.push_back({spec.name, spec.kind, column, column + width});
    column += width;
  }
  dimension_ = column;
}

const AttributeBlock& FeatureCodec::block(std::string_view attribute) const {
  for (const auto& b : blocks_)
    if (b.name == attribute) return b;
  throw DataError("codec: unknown attribute '" + std::string(attribute) + "'");
}

std::string FeatureCodec::serialize() const {
  std::string out;
  out += csv::join({std::string(kCodecMagic), std::to_string(kCodecVersion)}) + '\n';
  out += csv::join({"schema_hash", schema_hash()}) + '\n';
  out += csv::join({"dimension", std::to_string(dimension_)}) + '\n';
  for (std::size_t a = 0; a < schema_.size(); ++a) {
    const auto& name = schema_[a].name;
    if (const auto* s = std::get_if<ContinuousScaling>(&parameters_[a])) {
      out += csv::join({"continuous", name, format_hex(s->min), format_hex(s->max)}) + '\n';
    } else {
      std::vector<std::string> fields{"categorical", name};
      const auto& cats = std::get<CategoryList>(parameters_[a]).categories;
      fields.insert(fields.end(), cats.begin(), cats.end());
      out += csv::join(fields) + '\n';
    }
  }
  return out;
}

FeatureCodec FeatureCodec::deserialize(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.size() < 3 || rows[0].fields.size() != 2 || rows[0].fields[0] != kCodecMagic)
    throw DataError("codec: not a codec document");
  if (rows[0].fields[1] != std::to_string(kCodecVersion))
    throw DataError("codec: unsupported version " + rows[0].fields[1]);
  if (rows[1].fields.size() != 2 || rows[1].fields[0] != "schema_hash") throw DataError("codec: missing schema_hash");
  if (rows[2].fields.size() != 2 || rows[2].fields[0] != "dimension") throw DataError("codec: missing dimension");

  AttributeSchema schema;
  std::vector<Parameters> params;
  for (std::size_t r = 3; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() >= 2 && f[0] == "continuous" && f.size() == 4) {
      schema.add(f[1], AttributeKind::continuous);
      ContinuousScaling s{parse_double(f[2]), parse_double(f[3]), false};
      s.constant = s.max == s.min;
      params.emplace_back(s);
    } else if (f.size() >= 3 && f[0] == "categorical") {
      schema.add(f[1], AttributeKind::categorical);
      params.emplace_back(CategoryList{{f.begin() + 2, f.end()}});
    } else {
      throw ParseError("codec: malformed attribute line", rows[r].line, f.empty() ? "" : f[0]);
    }
  }
  FeatureCodec codec(std::move(schema), std::move(params));
  if (codec.schema_hash() != rows[1].fields[1]) throw DataError("codec: schema hash mismatch");
  if (std::to_string(codec.dimension()) != rows[2].fields[1]) throw DataError("codec: dimension mismatch");
  return codec;
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<std::string> node_ids)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), node_ids_(std::move(node_ids)) {
  if (!node_ids_.empty() && node_ids_.size() != rows_) throw DataError("feature matrix: node id count mismatch");
}

std::optional<std::size_t> FeatureMatrix::index_of(std::string_view id) const {
  auto it = std::find(node_ids_.begin(), node_ids_.end(), id);
  if (it == node_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids_.begin());
}

FeatureCodec fit_codec(std::span<const ProductRecord> products, const AttributeSchema& schema) {
  if (products.empty()) throw DataError("fit_codec: no products");
  std::vector<FeatureCodec::Parameters> params;
  for (const auto& spec : schema.attributes()) {
    if (spec.kind == AttributeKind::continuous) {
      ContinuousScaling s{products.front().number(spec.name), products.front().number(spec.name), false};
      for (const auto& p : products) {
        const double v = p.number(spec.name);
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
      }
      s.constant = s.max == s.min;
      params.emplace_back(s);
    } else {
      CategoryList list;
      for (const auto& p : products) {
        const auto& c = p.category(spec.name);
        if (std::find(list.categories.begin(), list.categories.end(), c) == list.categories.end())
          list.categories.push_back(c);
      }
      params.emplace_back(std::move(list));
    }
  }
  return FeatureCodec(schema, std::move(params));
}

EncodedFeatures encode_features(const FeatureCodec& codec, std::span<const ProductRecord> products) {
  std::vector<std::string> ids;
  ids.reserve(products.size());
  for (const auto& p : products) ids.push_back(p.product_id);

  EncodedFeatures out{FeatureMatrix(products.size(), codec.dimension(), std::move(ids)), 0};
  const auto& schema = codec.schema();
  for (std::size_t i = 0; i < products.size(); ++i) {
    auto row = out.matrix.row(i);
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const auto& block = codec.blocks()[a];
      if (const auto* s = std::get_if<ContinuousScaling>(&codec.parameters(a))) {
        const double v = products[i].number(block.name);
        row[block.begin] = s->constant ? 0.5 : std::clamp((v - s->min) / (s->max - s->min), 0.0, 1.0);
      } else {
        const auto& cats = std::get<CategoryList>(codec.parameters(a)).categories;
        const auto& c = products[i].category(block.name);
        auto it = std::find(cats.begin(), cats.end(), c);
        if (it == cats.end())
          ++out.unseen_categories;
        else
          row[block.begin + static_cast<std::size_t>(it - cats.begin())] = 1.0;
      }
    }
  }
  return out;
}

double cosine_similarity(const FeatureMatrix& matrix, std::size_t i, std::size_t j) {
  const auto a = matrix.row(i);
  const auto b = matrix.row(j);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace gnnlink
