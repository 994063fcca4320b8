#pragma once

// Model dump interchange format (see docs/dump-format.md) and the mapping from
// model subwords onto annotation words.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tdiff/index_set.hpp"

namespace tdiff {

inline constexpr char kDumpMagic[4] = {'T', 'D', 'W', 'B'};
inline constexpr std::uint16_t kDumpVersion = 1;
inline constexpr double kRowSumTolerance = 1e-4;

enum TokenFlags : std::uint8_t {
    kSpecial = 1u << 0,
    kEos = 1u << 1,
    kBos = 1u << 2,  // bos or language tag
};

struct CharSpan {
    std::int32_t begin = -1;  // UTF-8 byte offsets, half-open
    std::int32_t end = -1;

    bool overlaps(const CharSpan& other) const {
        return std::max(begin, other.begin) < std::min(end, other.end);
    }
    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct TokenRecord {
    std::string text;
    CharSpan span;
    std::uint8_t flags = 0;

    bool special() const { return (flags & kSpecial) != 0; }
    bool eos() const { return (flags & kEos) != 0; }
    friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct TokenSequence {
    std::vector<TokenRecord> tokens;

    int size() const { return static_cast<int>(tokens.size()); }
    const TokenRecord& at(int position) const { return tokens.at(static_cast<std::size_t>(position - 1)); }
    IndexSet non_special() const;
    IndexSet special() const;
    IndexSet eos() const;
    std::vector<CharSpan> spans() const;
    std::vector<bool> special_mask() const;
    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Natural-log probabilities of every non-initial token: entry i belongs to
// token position i + 2 of the owning sequence.
struct TokenLogProbs {
    std::vector<float> values;

    int size() const { return static_cast<int>(values.size()); }
    double at_position(int position) const;
    friend bool operator==(const TokenLogProbs&, const TokenLogProbs&) = default;
};

// Read-only view of one (layer, head) attention matrix. Indices are 1-based.
class AttentionView {
public:
    AttentionView(std::span<const float> data, int rows, int cols) : data_(data), rows_(rows), cols_(cols) {}
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double operator()(int row, int col) const {
        return data_[static_cast<std::size_t>(row - 1) * static_cast<std::size_t>(cols_) +
                     static_cast<std::size_t>(col - 1)];
    }

private:
    std::span<const float> data_;
    int rows_;
    int cols_;
};

struct AttentionTensor {
    int layers = 0;
    int heads = 0;
    int rows = 0;
    int cols = 0;
    std::vector<float> data;  // [layers, heads, rows, cols], row-major

    std::size_t expected_size() const {
        return static_cast<std::size_t>(layers) * heads * rows * cols;
    }
    AttentionView view(int layer, int head) const;  // 0-based layer/head
    friend bool operator==(const AttentionTensor&, const AttentionTensor&) = default;
};

struct ModelDump {
    std::string pair_id;
    std::string source_text;
    std::string target_text;
    int layers = 0;
    int heads = 0;
    AttentionTensor enc_attn;    // [L, H, S, S]
    AttentionTensor cross_attn;  // [L, H, T, S]
    AttentionTensor dec_attn;    // [L, H, T, T]
    TokenLogProbs lm_source;
    TokenLogProbs lm_target;
    TokenLogProbs mt_target;     // forced decoding of the human translation
    TokenSequence nmt_source;    // S positions
    TokenSequence nmt_target;    // T positions
    TokenSequence lm_source_tokens;
    TokenSequence lm_target_tokens;

    int source_length() const { return nmt_source.size(); }
    int target_length() const { return nmt_target.size(); }
    friend bool operator==(const ModelDump&, const ModelDump&) = default;
};

struct DumpWarning {
    std::string tensor;
    int layer = 0;
    int head = 0;
    int row = 0;
    double row_sum = 0.0;
    std::string message;
};

// Throws FormatError on magic/version mismatch and CorruptionError on any
// length or shape inconsistency. Attention rows whose sum is off by more than
// kRowSumTolerance are reported as warnings.
ModelDump read_dump(const std::filesystem::path& path, std::vector<DumpWarning>* warnings = nullptr);
ModelDump parse_dump(std::span<const std::uint8_t> bytes, std::vector<DumpWarning>* warnings = nullptr);
std::vector<std::uint8_t> encode_dump(const ModelDump& dump);
void write_dump(const std::filesystem::path& path, const ModelDump& dump);

std::vector<DumpWarning> check_row_sums(const ModelDump& dump);

struct DumpManifest {
    struct Entry {
        std::string pair_id;
        std::string file;
    };
    struct Failure {
        std::string pair_id;
        std::string reason;
    };
    int format_version = kDumpVersion;
    std::string lm_model;
    std::string nmt_model;
    std::string lm_tokenizer;
    std::string nmt_tokenizer;
    int layers = 0;
    int heads = 0;
    std::vector<Entry> pairs;
    std::vector<Failure> failures;
};

DumpManifest read_manifest(const std::filesystem::path& dump_dir);
void write_manifest(const std::filesystem::path& dump_dir, const DumpManifest& manifest);

// word index (1-based) -> subword positions (1-based, in the model sequence)
struct SubwordMap {
    std::vector<IndexSet> words;
    IndexSet orphans;  // non-special subwords overlapping no word

    int word_count() const { return static_cast<int>(words.size()); }
    const IndexSet& subwords_of(int word) const;
};

// Character spans of tokens joined by single spaces.
std::vector<CharSpan> word_spans(const std::vector<std::string>& tokens);
std::string join_tokens(const std::vector<std::string>& tokens);

// Every word maps to all non-special subwords whose span overlaps its own.
// Throws MappingError listing all words without any subword.
SubwordMap map_subwords(const std::vector<CharSpan>& words, const std::vector<CharSpan>& subwords,
                        const std::vector<bool>& special_mask);
SubwordMap map_subwords(const std::vector<std::string>& words, const TokenSequence& sequence);

IndexSet segment_subword_indices(const SegmentRef& segment, const SubwordMap& map);

}  // namespace tdiff
