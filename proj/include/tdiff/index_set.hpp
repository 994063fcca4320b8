#pragma once

// Word-level sentence types and the index algebra used by the feature
// definitions. Positions are 1-based throughout.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace tdiff {

enum class Side { source, target };

const char* to_string(Side side);
Side side_from_string(const std::string& text);

// Sorted, duplicate-free set of 1-based positions.
class IndexSet {
public:
    IndexSet() = default;
    IndexSet(std::initializer_list<int> members);
    explicit IndexSet(std::vector<int> members);

    static IndexSet range(int first, int last);  // inclusive; empty when last < first

    const std::vector<int>& members() const noexcept { return members_; }
    bool empty() const noexcept { return members_.empty(); }
    std::size_t size() const noexcept { return members_.size(); }
    int min() const;
    int max() const;
    bool contains(int position) const;

    auto begin() const noexcept { return members_.begin(); }
    auto end() const noexcept { return members_.end(); }

    IndexSet united(const IndexSet& other) const;
    IndexSet intersected(const IndexSet& other) const;
    IndexSet without(const IndexSet& other) const;

    // "2+4+5" style rendering used in tables.
    std::string to_string() const;
    static IndexSet parse(const std::string& text);

    friend bool operator==(const IndexSet&, const IndexSet&) = default;

private:
    std::vector<int> members_;
};

struct SegmentRef {
    Side side = Side::source;
    IndexSet indices;

    // Throws DomainError when empty or outside {1..sentence_length}.
    void validate(int sentence_length) const;

    friend bool operator==(const SegmentRef&, const SegmentRef&) = default;
};

struct SentencePair {
    std::string pair_id;
    std::vector<std::string> source_tokens;
    std::vector<std::string> target_tokens;
    std::string source_sentence_id;
    std::string language_pair;
    std::optional<std::vector<std::string>> pos_tags;

    int length(Side side) const;
    const std::vector<std::string>& tokens(Side side) const;

    friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

// {1..m} \ i
IndexSet complement_source(const IndexSet& segment, int sentence_length);

// {1..max(j)} \ j
IndexSet preceding_context(const IndexSet& segment);

// {1..max(j)}
IndexSet prefix_through(const IndexSet& segment);

}  // namespace tdiff
