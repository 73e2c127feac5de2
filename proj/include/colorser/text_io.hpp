#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace colorser::text {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Splits one CSV line on commas. Quoted fields are not supported; the
/// formats this project reads never need them.
std::vector<std::string> split_csv_line(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' from each and the final
/// empty line after a terminating newline.
std::vector<std::string> split_lines(std::string_view text);

/// Parses a decimal number, rejecting trailing garbage and non-finite values.
double parse_double(std::string_view field, std::string_view context);

/// ISO-8601 UTC: YYYY-MM-DDTHH:MM:SS[.fff](Z|+00:00).
Timestamp parse_timestamp(std::string_view text);

/// Inverse of parse_timestamp; milliseconds only when non-zero.
std::string format_timestamp(Timestamp ts);

Timestamp now_utc();

/// Shortest round-trip decimal representation.
std::string format_full(double value);

/// Six significant digits, for human-facing tables.
std::string format_table(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace colorser::text
