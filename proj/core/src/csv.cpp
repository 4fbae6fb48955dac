#include "gnnlink/csv.hpp"

#include "gnnlink/error.hpp"

namespace gnnlink::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t pos = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();

  while (pos < n) {
    const std::size_t row_line = line;
    if (text[pos] == '#') {
      while (pos < n && text[pos] != '\n') ++pos;
      if (pos < n) ++pos;
      ++line;
      continue;
    }
    if (text[pos] == '\n' || (text[pos] == '\r' && pos + 1 < n && text[pos + 1] == '\n')) {
      pos += text[pos] == '\r' ? 2 : 1;
      ++line;
      continue;
    }

    Row row;
    row.line = row_line;
    std::string field;
    bool in_quotes = false;
    bool done = false;
    while (!done) {
      if (pos >= n) {
        if (in_quotes) throw ParseError("unterminated quoted field", row_line, std::to_string(row.fields.size() + 1));
        row.fields.push_back(std::move(field));
        break;
      }
      const char c = text[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < n && text[pos + 1] == '"') {
            field += '"';
            pos += 2;
          } else {
            in_quotes = false;
            ++pos;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++pos;
        }
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          ++pos;
          break;
        case ',':
          row.fields.push_back(std::move(field));
          field.clear();
          ++pos;
          break;
        case '\r':
          ++pos;
          break;
        case '\n':
          row.fields.push_back(std::move(field));
          ++pos;
          ++line;
          done = true;
          break;
        default:
          field += c;
          ++pos;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace gnnlink::csv
