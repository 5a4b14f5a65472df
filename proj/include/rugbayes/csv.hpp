#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rugbayes::csv {

// Splits one line on commas. Quoted fields are not supported; team names
// and numeric cells never contain commas in the supported schemas.
std::vector<std::string> split_line(std::string_view line);

std::string_view trim(std::string_view s);

// Shortest representation that round-trips to the same double.
std::string format_double(double value);

bool parse_int(std::string_view text, std::int64_t& out);
bool parse_double(std::string_view text, double& out);

}  // namespace rugbayes::csv
