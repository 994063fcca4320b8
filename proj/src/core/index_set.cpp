#include "tdiff/index_set.hpp"

#include <algorithm>
#include <charconv>
#include <iterator>

#include "tdiff/errors.hpp"

namespace tdiff {

const char* to_string(Side side) {
    return side == Side::source ? "source" : "target";
}

Side side_from_string(const std::string& text) {
    if (text == "source" || text == "src" || text == "S") return Side::source;
    if (text == "target" || text == "tgt" || text == "T") return Side::target;
    throw DomainError("unknown side '" + text + "'");
}

IndexSet::IndexSet(std::initializer_list<int> members) : IndexSet(std::vector<int>(members)) {}

IndexSet::IndexSet(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!members_.empty() && members_.front() < 1)
        throw DomainError("index set positions are 1-based, got " + std::to_string(members_.front()));
}

IndexSet IndexSet::range(int first, int last) {
    IndexSet out;
    for (int p = std::max(first, 1); p <= last; ++p) out.members_.push_back(p);
    return out;
}

int IndexSet::min() const {
    if (members_.empty()) throw DomainError("min() of empty index set");
    return members_.front();
}

int IndexSet::max() const {
    if (members_.empty()) throw DomainError("max() of empty index set");
    return members_.back();
}

bool IndexSet::contains(int position) const {
    return std::binary_search(members_.begin(), members_.end(), position);
}

IndexSet IndexSet::united(const IndexSet& other) const {
    IndexSet out;
    std::set_union(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                   std::back_inserter(out.members_));
    return out;
}

IndexSet IndexSet::intersected(const IndexSet& other) const {
    IndexSet out;
    std::set_intersection(members_.begin(), members_.end(), other.members_.begin(),
                          other.members_.end(), std::back_inserter(out.members_));
    return out;
}

IndexSet IndexSet::without(const IndexSet& other) const {
    IndexSet out;
    std::set_difference(members_.begin(), members_.end(), other.members_.begin(),
                        other.members_.end(), std::back_inserter(out.members_));
    return out;
}

std::string IndexSet::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (i) out += '+';
        out += std::to_string(members_[i]);
    }
    return out;
}

IndexSet IndexSet::parse(const std::string& text) {
    std::vector<int> members;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end) {
        while (p < end && (*p == '+' || *p == ' ' || *p == ',')) ++p;
        if (p == end) break;
        int value = 0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc() || next == p)
            throw DomainError("malformed index list '" + text + "'");
        members.push_back(value);
        p = next;
    }
    return IndexSet(std::move(members));
}

void SegmentRef::validate(int sentence_length) const {
    if (indices.empty()) throw DomainError("segment has no positions");
    if (indices.max() > sentence_length)
        throw DomainError("segment position " + std::to_string(indices.max()) +
                          " exceeds sentence length " + std::to_string(sentence_length));
}

int SentencePair::length(Side side) const {
    return static_cast<int>(tokens(side).size());
}

const std::vector<std::string>& SentencePair::tokens(Side side) const {
    return side == Side::source ? source_tokens : target_tokens;
}

IndexSet complement_source(const IndexSet& segment, int sentence_length) {
    if (sentence_length < 0) throw DomainError("negative sentence length");
    if (!segment.empty() && segment.max() > sentence_length)
        throw DomainError("index " + std::to_string(segment.max()) + " out of range 1.." +
                          std::to_string(sentence_length));
    return IndexSet::range(1, sentence_length).without(segment);
}

IndexSet preceding_context(const IndexSet& segment) {
    if (segment.empty()) throw DomainError("preceding_context of empty segment");
    return IndexSet::range(1, segment.max()).without(segment);
}

IndexSet prefix_through(const IndexSet& segment) {
    if (segment.empty()) throw DomainError("prefix_through of empty segment");
    return IndexSet::range(1, segment.max());
}

}  // namespace tdiff
