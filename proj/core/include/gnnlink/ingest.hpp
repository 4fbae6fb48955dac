#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gnnlink {

/// Category token substituted for an empty categorical cell.
inline constexpr std::string_view kMissingCategory = "__missing__";

struct ConsiderationRecord {
  std::string customer_id;
  std::vector<std::string> considered;  // non-empty, no duplicates

  friend bool operator==(const ConsiderationRecord&, const ConsiderationRecord&) = default;
};

enum class AttributeKind { continuous, categorical };

std::string_view to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(std::string_view text);

struct AttributeSpec {
  std::string name;
  AttributeKind kind;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

/// Ordered attribute list. Order defines the feature column-block order downstream.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<AttributeSpec> attributes);

  void add(std::string name, AttributeKind kind);

  std::span<const AttributeSpec> attributes() const noexcept { return attributes_; }
  std::size_t size() const noexcept { return attributes_.size(); }
  const AttributeSpec& operator[](std::size_t i) const { return attributes_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;

  /// Stable fingerprint of names and kinds in order.
  std::string hash() const;

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;

 private:
  std::vector<AttributeSpec> attributes_;
};

using AttributeValue = std::variant<double, std::string>;

struct ProductRecord {
  std::string product_id;
  std::map<std::string, AttributeValue, std::less<>> attribute_values;

  const AttributeValue& value(std::string_view attribute) const;
  double number(std::string_view attribute) const;
  const std::string& category(std::string_view attribute) const;

  friend bool operator==(const ProductRecord&, const ProductRecord&) = default;
};

struct RowRejection {
  std::size_t line = 0;
  std::string reason;
};

struct SurveyParseResult {
  std::vector<ConsiderationRecord> records;
  std::vector<RowRejection> rejections;
  std::size_t duplicate_warnings = 0;  // duplicate product ids dropped within a row
  std::size_t oversize_warnings = 0;   // rows with more than three considered products
};

struct ProductParseResult {
  std::vector<ProductRecord> products;
  std::vector<RowRejection> rejections;  // rows with a missing continuous value
};

/// Survey CSV: customer_id,consider_1,...,consider_M. Throws DataError on a bad header.
SurveyParseResult parse_survey(std::string_view text);

/// Product CSV: product_id,<attr...>. Throws ParseError on a non-numeric continuous
/// value and DataError on a duplicate product id or a missing schema column.
ProductParseResult parse_products(std::string_view text, const AttributeSchema& schema);

/// Schema file: one `name,kind` pair per line.
AttributeSchema parse_schema(std::string_view text);

std::string write_survey(std::span<const ConsiderationRecord> records);
std::string write_products(std::span<const ProductRecord> products, const AttributeSchema& schema);
std::string write_schema(const AttributeSchema& schema);

struct ValidationSummary {
  bool valid = true;
  std::vector<std::string> unknown_ids;  // sorted, unique
  std::map<std::string, std::size_t, std::less<>> consideration_counts;  // every table product
};

ValidationSummary validate_dataset(std::span<const ConsiderationRecord> records,
                                   std::span<const ProductRecord> products);

}  // namespace gnnlink
