#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the file-format readers and writers.
namespace mska::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::optional<double> parse_double(std::string_view s);
std::optional<std::size_t> parse_size(std::string_view s);

/// Round-trip exact decimal rendering (17 significant digits).
std::string format_double(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s);

}  // namespace mska::text
