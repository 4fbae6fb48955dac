#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnnlink/ingest.hpp"

namespace gnnlink {

struct ContinuousScaling {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;  // max == min; encodes as 0.5

  friend bool operator==(const ContinuousScaling&, const ContinuousScaling&) = default;
};

struct CategoryList {
  std::vector<std::string> categories;  // first-seen order

  friend bool operator==(const CategoryList&, const CategoryList&) = default;
};

/// Half-open column range [begin, end) owned by one attribute.
struct AttributeBlock {
  std::string name;
  AttributeKind kind;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const noexcept { return end - begin; }
  friend bool operator==(const AttributeBlock&, const AttributeBlock&) = default;
};

/// Fitted min-max and one-hot encoders. Immutable once fitted.
class FeatureCodec {
 public:
  using Parameters = std::variant<ContinuousScaling, CategoryList>;

  FeatureCodec(AttributeSchema schema, std::vector<Parameters> parameters);

  const AttributeSchema& schema() const noexcept { return schema_; }
  std::string schema_hash() const { return schema_.hash(); }
  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const AttributeBlock> blocks() const noexcept { return blocks_; }
  const AttributeBlock& block(std::string_view attribute) const;
  const Parameters& parameters(std::size_t attribute) const { return parameters_[attribute]; }

  /// Versioned text document; deserialize(serialize()) reproduces the codec exactly.
  std::string serialize() const;
  static FeatureCodec deserialize(std::string_view text);

  friend bool operator==(const FeatureCodec& a, const FeatureCodec& b) {
    return a.schema_ == b.schema_ && a.parameters_ == b.parameters_;
  }

 private:
  AttributeSchema schema_;
  std::vector<Parameters> parameters_;
  std::vector<AttributeBlock> blocks_;
  std::size_t dimension_ = 0;
};

/// Row-major N x D node-feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<std::string> node_ids = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
  std::optional<std::size_t> index_of(std::string_view id) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::vector<std::string> node_ids_;
};

/// Fits scalings and category lists on the given products. Throws DataError when a
/// product lacks an attribute or there are no products.
FeatureCodec fit_codec(std::span<const ProductRecord> products, const AttributeSchema& schema);

struct EncodedFeatures {
  FeatureMatrix matrix;
  std::size_t unseen_categories = 0;
};

/// Continuous values are min-max scaled and clamped to [0,1]; categories not seen at
/// fit time encode as an all-zero block and are counted.
EncodedFeatures encode_features(const FeatureCodec& codec, std::span<const ProductRecord> products);

/// Cosine similarity of two rows; 0 when either row is all zero.
double cosine_similarity(const FeatureMatrix& matrix, std::size_t i, std::size_t j);

}  // namespace gnnlink
