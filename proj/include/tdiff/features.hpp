#pragma once

// Surprisal, attention flow/entropy features and control predictors.

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tdiff/dump.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/index_set.hpp"

namespace tdiff {

enum class Feature {
    s_lm,
    s_mt,
    // source side
    f_e_uu,
    f_e_u_ctx,
    f_e_u_eos,
    f_e_ctx_u,
    H_e_u_x,
    f_c_y_u,
    // target side
    f_c_v_eos,
    H_c_v_x,
    f_d_vv,
    f_d_v_ctx,
    H_d_v_prefix,
    // controls
    length_tokens,
    mean_log_freq,
    mean_pos_quantile,
};

inline constexpr std::size_t kFeatureCount = 16;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "s_lm",      "s_mt",    "f_e_uu",    "f_e_u_ctx", "f_e_u_eos",    "f_e_ctx_u",
    "H_e_u_x",   "f_c_y_u", "f_c_v_eos", "H_c_v_x",   "f_d_vv",       "f_d_v_ctx",
    "H_d_v_prefix", "length_tokens", "mean_log_freq", "mean_pos_quantile"};

inline constexpr std::array<Feature, 6> kSourceAttentionFeatures{
    Feature::f_e_uu, Feature::f_e_u_ctx, Feature::f_e_u_eos,
    Feature::f_e_ctx_u, Feature::H_e_u_x, Feature::f_c_y_u};
inline constexpr std::array<Feature, 5> kTargetAttentionFeatures{
    Feature::f_c_v_eos, Feature::H_c_v_x, Feature::f_d_vv, Feature::f_d_v_ctx, Feature::H_d_v_prefix};
inline constexpr std::array<Feature, 3> kControlFeatures{
    Feature::length_tokens, Feature::mean_log_freq, Feature::mean_pos_quantile};

std::string_view feature_name(Feature f);
Feature feature_from_name(std::string_view name);  // throws ConfigError

struct FeatureVector {
    std::array<std::optional<double>, kFeatureCount> values{};

    std::optional<double>& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
    const std::optional<double>& operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// ---------------------------------------------------------------------------
// Surprisal

struct SurprisalSum {
    double total = 0.0;  // sum of -log p over the positions
    int count = 0;
    double mean() const { return total / count; }
};

// positions index the owning token sequence; see TokenLogProbs.
SurprisalSum surprisal_sum(const TokenLogProbs& logprobs, const IndexSet& positions);

// Per-token mean surprisal in nats. Throws DomainError on an empty segment.
double lm_surprisal(const TokenLogProbs& logprobs, const IndexSet& positions);

// The translation model conditions on the full source, so only target segments
// have a translation surprisal; Side::source throws UnsupportedError.
double mt_surprisal(const TokenLogProbs& logprobs, const IndexSet& positions, Side side = Side::target);

// ---------------------------------------------------------------------------
// Attention flow and entropy

template <class M>
concept AttentionMatrix = requires(const M& m, int r, int c) {
    { m.rows() } -> std::convertible_to<int>;
    { m.cols() } -> std::convertible_to<int>;
    { m(r, c) } -> std::convertible_to<double>;
};

// Every row spreads its mass evenly over the full row, specials included.
class UniformAttention {
public:
    UniformAttention(int rows, int cols) : rows_(rows), cols_(cols) {}
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double operator()(int, int) const { return 1.0 / cols_; }

private:
    int rows_;
    int cols_;
};

namespace detail {
inline void check_bounds(const IndexSet& set, int limit, const char* what) {
    if (!set.empty() && set.max() > limit)
        throw DomainError(std::string(what) + " index " + std::to_string(set.max()) +
                          " outside attention matrix of size " + std::to_string(limit));
}
}  // namespace detail

// Total attention mass sent from the `from` rows to the `to` columns.
template <AttentionMatrix M>
double flow(const M& a, const IndexSet& from, const IndexSet& to) {
    detail::check_bounds(from, a.rows(), "row");
    detail::check_bounds(to, a.cols(), "column");
    double total = 0.0;
    for (int k : from)
        for (int l : to) total += a(k, l);
    return total;
}

// Sum over `from` rows of the entropy of the row restricted to `to` and
// renormalized. Rows with no mass on `to` contribute 0.
template <AttentionMatrix M>
double attn_entropy(const M& a, const IndexSet& from, const IndexSet& to) {
    detail::check_bounds(from, a.rows(), "row");
    detail::check_bounds(to, a.cols(), "column");
    double total = 0.0;
    for (int k : from) {
        double mass = 0.0;
        for (int l : to) mass += a(k, l);
        if (!(mass > 0.0)) continue;
        for (int l : to) {
            const double p = a(k, l) / mass;
            if (p > 0.0) total -= p * std::log(p);
        }
    }
    return total;
}

// raw / dummy, with 0 when the dummy value is 0.
double normalize_feature(double raw, double dummy);

// ---------------------------------------------------------------------------
// Feature sets over a dump

// Word -> subword maps for the four token sequences of a dump. Throws
// MappingError when the dump text does not match the sentence tokens.
struct DumpMaps {
    SubwordMap nmt_source;
    SubwordMap nmt_target;
    SubwordMap lm_source;
    SubwordMap lm_target;
};

DumpMaps build_maps(const ModelDump& dump, const SentencePair& sentence);

// Six source-side attention features for the NMT source positions of u,
// normalized per (layer, head) and averaged.
FeatureVector source_feature_set(const ModelDump& dump, const IndexSet& u_subwords);
FeatureVector source_feature_set(const ModelDump& dump, const SegmentRef& u, const DumpMaps& maps);

// Five target-side attention features for the NMT target positions of v.
FeatureVector target_feature_set(const ModelDump& dump, const IndexSet& v_subwords);
FeatureVector target_feature_set(const ModelDump& dump, const SegmentRef& v, const DumpMaps& maps);

// ---------------------------------------------------------------------------
// Controls

class FrequencyTable {
public:
    FrequencyTable() = default;
    explicit FrequencyTable(std::unordered_map<std::string, double> freq,
                            std::optional<double> floor = std::nullopt);

    // Two columns per line: word, frequency per billion (tab or space separated).
    static FrequencyTable load(const std::filesystem::path& path, std::optional<double> floor = std::nullopt);

    std::optional<double> lookup(const std::string& word) const;
    double floor() const { return floor_; }
    std::size_t size() const { return freq_.size(); }

private:
    std::unordered_map<std::string, double> freq_;
    double floor_ = 1.0;
};

struct ControlValues {
    double length_tokens = 0.0;
    double mean_log_freq = 0.0;
    double mean_pos_quantile = 0.0;
    std::vector<std::string> oov_words;
};

ControlValues control_features(const SegmentRef& segment, const SentencePair& sentence,
                               const FrequencyTable& freq, int subword_count);

// ln(duration_ms / aligned_source_words). Throws DomainError when n < 1.
double avg_translation_duration(double duration_ms, int aligned_source_words);

// Full predictor vector of one unit: surprisal, the side's attention features and controls.
FeatureVector extract_features(const ModelDump& dump, const DumpMaps& maps, const SentencePair& sentence,
                               const SegmentRef& unit, const FrequencyTable& freq,
                               std::vector<std::string>* oov_words = nullptr);

}  // namespace tdiff
