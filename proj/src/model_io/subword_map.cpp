#include "tdiff/dump.hpp"
#include "tdiff/errors.hpp"

namespace tdiff {

const IndexSet& SubwordMap::subwords_of(int word) const {
    if (word < 1 || word > word_count())
        throw MappingError("word " + std::to_string(word) + " is not in the subword map", {word});
    return words[static_cast<std::size_t>(word - 1)];
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<CharSpan> word_spans(const std::vector<std::string>& tokens) {
    std::vector<CharSpan> out;
    std::int32_t pos = 0;
    for (const auto& t : tokens) {
        out.push_back({pos, pos + static_cast<std::int32_t>(t.size())});
        pos += static_cast<std::int32_t>(t.size()) + 1;
    }
    return out;
}

SubwordMap map_subwords(const std::vector<CharSpan>& words, const std::vector<CharSpan>& subwords,
                        const std::vector<bool>& special_mask) {
    if (special_mask.size() != subwords.size())
        throw ContractError("special mask length differs from subword count");
    SubwordMap map;
    map.words.resize(words.size());
    std::vector<bool> covered(subwords.size(), false);
    std::vector<int> unmapped;

    // Both span lists are sorted, so a sliding lower bound keeps this linear
    // apart from the overlap fan-out.
    std::size_t first = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::vector<int> members;
        while (first < subwords.size() &&
               (special_mask[first] || subwords[first].end <= words[w].begin))
            ++first;
        for (std::size_t s = first; s < subwords.size(); ++s) {
            if (special_mask[s]) continue;
            if (subwords[s].begin >= words[w].end) break;
            if (subwords[s].overlaps(words[w])) {
                members.push_back(static_cast<int>(s) + 1);
                covered[s] = true;
            }
        }
        if (members.empty()) unmapped.push_back(static_cast<int>(w) + 1);
        map.words[w] = IndexSet(std::move(members));
    }
    if (!unmapped.empty()) {
        std::string list;
        for (int w : unmapped) list += (list.empty() ? "" : ", ") + std::to_string(w);
        throw MappingError("no subword overlaps word(s) " + list, unmapped);
    }
    std::vector<int> orphans;
    for (std::size_t s = 0; s < subwords.size(); ++s)
        if (!special_mask[s] && !covered[s]) orphans.push_back(static_cast<int>(s) + 1);
    map.orphans = IndexSet(std::move(orphans));
    return map;
}

SubwordMap map_subwords(const std::vector<std::string>& words, const TokenSequence& sequence) {
    return map_subwords(word_spans(words), sequence.spans(), sequence.special_mask());
}

IndexSet segment_subword_indices(const SegmentRef& segment, const SubwordMap& map) {
    IndexSet out;
    for (int w : segment.indices) out = out.united(map.subwords_of(w));
    return out;
}

}  // namespace tdiff
