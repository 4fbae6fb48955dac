#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gnnlink::csv {

struct Row {
  std::size_t line = 0;  // 1-based line of the row's first character
  std::vector<std::string> fields;
};

/// Parses comma-separated text with RFC 4180 quoting. Blank lines and lines whose
/// first character is '#' are skipped. A trailing '\r' is stripped from each line.
std::vector<Row> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

std::string trim(std::string_view s);

}  // namespace gnnlink::csv
