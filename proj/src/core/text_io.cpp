#include "tdiff/text_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdiff/errors.hpp"

namespace tdiff {

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(line.substr(start));
            break;
        }
        parts.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string trim(std::string_view text) {
    const char* ws = " \t\r\n";
    auto b = text.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = text.find_last_not_of(ws);
    return std::string(text.substr(b, e - b + 1));
}

std::string format_number(double value) {
    if (!std::isfinite(value)) return "NA";
    if (value == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_number(const std::optional<double>& value) {
    return value ? format_number(*value) : std::string("NA");
}

std::string format_fixed(double value, int decimals) {
    if (!std::isfinite(value)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string out(buf);
    if (out.find_first_not_of("-0.") == std::string::npos && out[0] == '-') out.erase(0, 1);
    return out;
}

std::optional<double> parse_number(std::string_view text) {
    std::string t = trim(text);
    if (t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "---" || t == "-" ||
        t == "None" || t == "null")
        return std::nullopt;
    double value = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw DomainError("not a number: '" + t + "'");
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

std::size_t Table::require_column(std::string_view name, std::string_view context) const {
    auto idx = column(name);
    if (!idx)
        throw ConfigError("missing mandatory column '" + std::string(name) + "' in " +
                          std::string(context));
    return *idx;
}

Table read_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open table " + path.string());
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (trim(line).empty()) continue;
            table.header = split(line, '\t');
            for (auto& h : table.header) h = trim(h);
            have_header = true;
            continue;
        }
        if (trim(line).empty()) continue;
        table.rows.push_back(split(line, '\t'));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ConfigError("table " + path.string() + " has no header row");
    return table;
}

std::string render_tsv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::string out = join(header, "\t");
    out += '\n';
    for (const auto& row : rows) {
        out += join(row, "\t");
        out += '\n';
    }
    return out;
}

}  // namespace tdiff
