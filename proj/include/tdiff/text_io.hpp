#pragma once

// Small helpers for the tab-separated tables every stage reads and writes.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tdiff {

std::vector<std::string> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string trim(std::string_view text);

// Shortest representation that round-trips; "NA" for missing or non-finite values.
std::string format_number(double value);
std::string format_number(const std::optional<double>& value);
std::string format_fixed(double value, int decimals);

// Parses a decimal number; empty, "NA", "NaN", "---" and similar yield nullopt.
std::optional<double> parse_number(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::filesystem::path& path, std::string_view content);

// Header-indexed tab-separated table.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line per row

    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name, std::string_view context) const;
};

Table read_tsv(const std::filesystem::path& path);
std::string render_tsv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

}  // namespace tdiff
