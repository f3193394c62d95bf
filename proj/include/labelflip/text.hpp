#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace labelflip::text {

/// Shortest decimal string that parses back to exactly `value`.
std::string shortest(double value);

/// Strict full-token parse; accepts a leading '+'. nullopt on any junk.
std::optional<double> to_double(std::string_view token);
std::optional<long long> to_integer(std::string_view token);

/// Splits on runs of spaces/tabs; never returns empty tokens.
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_char(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace labelflip::text
