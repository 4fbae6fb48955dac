#include "gnnlink/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

constexpr std::size_t kUsualConsiderationCap = 3;

}  // namespace

std::string_view to_string(AttributeKind kind) {
  return kind == AttributeKind::continuous ? "continuous" : "categorical";
}

AttributeKind attribute_kind_from_string(std::string_view text) {
  if (text == "continuous") return AttributeKind::continuous;
  if (text == "categorical") return AttributeKind::categorical;
  throw DataError("unknown attribute kind '" + std::string(text) + "'");
}

AttributeSchema::AttributeSchema(std::vector<AttributeSpec> attributes) {
  for (auto& a : attributes) add(std::move(a.name), a.kind);
}

void AttributeSchema::add(std::string name, AttributeKind kind) {
  if (name.empty()) throw DataError("schema: empty attribute name");
  if (name == "product_id") throw DataError("schema: 'product_id' is reserved");
  if (find(name)) throw DataError("schema: duplicate attribute '" + name + "'");
  attributes_.push_back({std::move(name), kind});
}

std::optional<std::size_t> AttributeSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i)
    if (attributes_[i].name == name) return i;
  return std::nullopt;
}

std::string AttributeSchema::hash() const {
  std::string canonical;
  for (const auto& a : attributes_) {
    canonical += a.name;
    canonical += '\x1f';
    canonical += to_string(a.kind);
    canonical += '\x1e';
  }
  return hash_hex(canonical);
}

const AttributeValue& ProductRecord::value(std::string_view attribute) const {
  auto it = attribute_values.find(attribute);
  if (it == attribute_values.end())
    throw DataError("product '" + product_id + "' has no attribute '" + std::string(attribute) + "'");
  return it->second;
}

double ProductRecord::number(std::string_view attribute) const {
  const auto& v = value(attribute);
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw DataError("attribute '" + std::string(attribute) + "' of '" + product_id + "' is not numeric");
}

const std::string& ProductRecord::category(std::string_view attribute) const {
  const auto& v = value(attribute);
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw DataError("attribute '" + std::string(attribute) + "' of '" + product_id + "' is not categorical");
}

SurveyParseResult parse_survey(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows.front().fields.size() < 2 || csv::trim(rows.front().fields[0]) != "customer_id")
    throw DataError("survey: header must be 'customer_id,consider_1[,...]'");

  SurveyParseResult result;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::string customer = csv::trim(row.fields[0]);
    if (customer.empty()) {
      result.rejections.push_back({row.line, "empty customer_id"});
      continue;
    }
    ConsiderationRecord rec{std::move(customer), {}};
    for (std::size_t c = 1; c < row.fields.size(); ++c) {
      std::string id = csv::trim(row.fields[c]);
      if (id.empty()) continue;
      if (std::find(rec.considered.begin(), rec.considered.end(), id) != rec.considered.end()) {
        ++result.duplicate_warnings;
        continue;
      }
      rec.considered.push_back(std::move(id));
    }
    if (rec.considered.empty()) {
      result.rejections.push_back({row.line, "no considered products"});
      continue;
    }
    if (rec.considered.size() > kUsualConsiderationCap) ++result.oversize_warnings;
    result.records.push_back(std::move(rec));
  }
  return result;
}

ProductParseResult parse_products(std::string_view text, const AttributeSchema& schema) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw DataError("products: missing header");

  std::vector<std::string> header;
  for (const auto& f : rows.front().fields) header.push_back(csv::trim(f));
  auto column_of = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("products: header lacks column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column_of("product_id");
  std::vector<std::size_t> attr_cols;
  for (const auto& a : schema.attributes()) attr_cols.push_back(column_of(a.name));

  ProductParseResult result;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](std::size_t col) { return col < row.fields.size() ? csv::trim(row.fields[col]) : std::string{}; };

    ProductRecord rec;
    rec.product_id = cell(id_col);
    if (rec.product_id.empty()) throw ParseError("products: empty product_id", row.line, "product_id");
    if (!seen.insert(rec.product_id).second)
      throw DataError("products: duplicate product_id '" + rec.product_id + "' at line " + std::to_string(row.line));

    bool rejected = false;
    for (std::size_t a = 0; a < schema.size() && !rejected; ++a) {
      const auto& spec = schema[a];
      std::string raw = cell(attr_cols[a]);
      if (spec.kind == AttributeKind::categorical) {
        rec.attribute_values.emplace(spec.name, raw.empty() ? std::string(kMissingCategory) : std::move(raw));
        continue;
      }
      if (raw.empty()) {
        result.rejections.push_back({row.line, "missing continuous value for '" + spec.name + "'"});
        rejected = true;
        continue;
      }
      double v = 0.0;
      try {
        v = parse_double(raw);
      } catch (const std::invalid_argument&) {
        throw ParseError("products: line " + std::to_string(row.line) + ", column '" + spec.name +
                             "': non-numeric value '" + raw + "'",
                         row.line, spec.name);
      }
      if (!std::isfinite(v))
        throw ParseError("products: line " + std::to_string(row.line) + ", column '" + spec.name +
                             "': non-finite value",
                         row.line, spec.name);
      rec.attribute_values.emplace(spec.name, v);
    }
    if (!rejected) result.products.push_back(std::move(rec));
  }
  return result;
}

AttributeSchema parse_schema(std::string_view text) {
  AttributeSchema schema;
  for (const auto& row : csv::parse(text)) {
    if (row.fields.size() != 2) throw ParseError("schema: expected 'name,kind'", row.line, "kind");
    std::string name = csv::trim(row.fields[0]);
    std::string kind = csv::trim(row.fields[1]);
    if (name == "name" && kind == "kind") continue;  // optional header
    try {
      schema.add(std::move(name), attribute_kind_from_string(kind));
    } catch (const DataError& e) {
      throw ParseError(std::string(e.what()) + " at line " + std::to_string(row.line), row.line, "kind");
    }
  }
  if (schema.size() == 0) throw DataError("schema: no attributes");
  return schema;
}

std::string write_survey(std::span<const ConsiderationRecord> records) {
  std::size_t width = 1;
  for (const auto& r : records) width = std::max(width, r.considered.size());
  std::vector<std::string> header{"customer_id"};
  for (std::size_t i = 1; i <= width; ++i) header.push_back("consider_" + std::to_string(i));
  std::string out = csv::join(header) + '\n';
  for (const auto& r : records) {
    std::vector<std::string> fields{r.customer_id};
    fields.insert(fields.end(), r.considered.begin(), r.considered.end());
    out += csv::join(fields) + '\n';
  }
  return out;
}

std::string write_products(std::span<const ProductRecord> products, const AttributeSchema& schema) {
  std::vector<std::string> header{"product_id"};
  for (const auto& a : schema.attributes()) header.push_back(a.name);
  std::string out = csv::join(header) + '\n';
  for (const auto& p : products) {
    std::vector<std::string> fields{p.product_id};
    for (const auto& a : schema.attributes()) {
      const auto& v = p.value(a.name);
      if (const double* d = std::get_if<double>(&v))
        fields.push_back(format_shortest(*d));
      else
        fields.push_back(std::get<std::string>(v));
    }
    out += csv::join(fields) + '\n';
  }
  return out;
}

std::string write_schema(const AttributeSchema& schema) {
  std::string out;
  for (const auto& a : schema.attributes())
    out += csv::join({a.name, std::string(to_string(a.kind))}) + '\n';
  return out;
}

ValidationSummary validate_dataset(std::span<const ConsiderationRecord> records,
                                   std::span<const ProductRecord> products) {
  ValidationSummary summary;
  for (const auto& p : products) summary.consideration_counts.emplace(p.product_id, 0);
  std::set<std::string> unknown;
  for (const auto& r : records) {
    for (const auto& id : r.considered) {
      auto it = summary.consideration_counts.find(id);
      if (it == summary.consideration_counts.end())
        unknown.insert(id);
      else
        ++it->second;
    }
  }
  summary.unknown_ids.assign(unknown.begin(), unknown.end());
  summary.valid = summary.unknown_ids.empty();
  return summary;
}

}  // namespace gnnlink
