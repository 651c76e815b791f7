#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qsmooth {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string_view> split_csv_line(std::string_view line);
std::string join_csv(const std::vector<std::string>& cells);

}  // namespace qsmooth
