#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gnnlink {

inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hash_hex(std::string_view data);

/// Exact hexadecimal float text (e.g. "0x1.8p+1"); parse_double accepts it and decimal.
std::string format_hex(double value);
std::string format_decimal(double value, int precision = 6);
/// Shortest decimal text that parses back to the same double.
std::string format_shortest(double value);
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

}  // namespace gnnlink
