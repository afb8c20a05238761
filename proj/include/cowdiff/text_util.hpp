#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cowdiff {

/// Drops everything from the first '#'.
std::string_view strip_comment(std::string_view line);
std::string_view trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

/// Strict numeric parsing: the whole token must be consumed.
double parse_double(std::string_view s);
int parse_int(std::string_view s);
long long parse_int64(std::string_view s);
bool parse_bool(std::string_view s);
/// Comma-separated doubles.
std::vector<double> parse_double_list(std::string_view s);
std::vector<int> parse_int_list(std::string_view s);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);

}  // namespace cowdiff
