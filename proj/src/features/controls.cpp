#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>

#include "tdiff/features.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

FrequencyTable::FrequencyTable(std::unordered_map<std::string, double> freq, std::optional<double> floor)
    : freq_(std::move(freq)) {
    if (floor) {
        if (!(*floor > 0.0)) throw ConfigError("frequency floor must be positive");
        floor_ = *floor;
        return;
    }
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& [w, f] : freq_)
        if (f > 0.0) smallest = std::min(smallest, f);
    if (!std::isfinite(smallest)) throw ConfigError("frequency table has no positive entry");
    floor_ = smallest;
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path, std::optional<double> floor) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open frequency table " + path.string());
    std::unordered_map<std::string, double> freq;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto cut = t.find_first_of("\t ");
        if (cut == std::string::npos)
            throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) + ": expected two columns");
        auto value = parse_number(trim(t.substr(cut + 1)));
        if (!value)
            throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) + ": missing frequency");
        freq[t.substr(0, cut)] = *value;
    }
    return FrequencyTable(std::move(freq), floor);
}

std::optional<double> FrequencyTable::lookup(const std::string& word) const {
    auto it = freq_.find(word);
    if (it == freq_.end()) {
        std::string lower = word;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        it = freq_.find(lower);
    }
    if (it == freq_.end() || !(it->second > 0.0)) return std::nullopt;
    return it->second;
}

ControlValues control_features(const SegmentRef& segment, const SentencePair& sentence,
                               const FrequencyTable& freq, int subword_count) {
    const int n = sentence.length(segment.side);
    segment.validate(n);
    const auto& tokens = sentence.tokens(segment.side);
    ControlValues out;
    out.length_tokens = subword_count;
    double log_freq = 0.0;
    double quantile = 0.0;
    for (int w : segment.indices) {
        const std::string& word = tokens[static_cast<std::size_t>(w - 1)];
        auto f = freq.lookup(word);
        if (!f) out.oov_words.push_back(word);
        log_freq += std::log(std::max(f.value_or(0.0), freq.floor()));
        quantile += static_cast<double>(w) / n;
    }
    const double k = static_cast<double>(segment.indices.size());
    out.mean_log_freq = log_freq / k;
    out.mean_pos_quantile = quantile / k;
    return out;
}

double avg_translation_duration(double duration_ms, int aligned_source_words) {
    if (aligned_source_words < 1) throw DomainError("average duration needs at least one aligned source word");
    if (!(duration_ms > 0.0)) throw DomainError("duration must be positive");
    return std::log(duration_ms / aligned_source_words);
}

}  // namespace tdiff
