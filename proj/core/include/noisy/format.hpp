#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace noisy {

/// Shortest decimal text that parses back to exactly x.
std::string format_double(double x);

/// Strict parse of a full field; throws std::invalid_argument.
double parse_double(std::string_view text);

/// Splits a CSV line on commas (no quoting; the formats here never need it).
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace noisy
