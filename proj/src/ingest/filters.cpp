#include <algorithm>
#include <cmath>

#include "tdiff/errors.hpp"
#include "tdiff/ingest.hpp"
#include "tdiff/rng.hpp"

namespace tdiff {

std::vector<BehavioralObservation> filter_and_scale(std::vector<BehavioralObservation> obs,
                                                    FilterStats* stats) {
    FilterStats local;
    std::vector<BehavioralObservation> out;
    out.reserve(obs.size());
    for (auto& o : obs) {
        if (o.log_scaled) throw ContractError("observation " + o.id + " is already log scaled");
        for (std::size_t m = 0; m < kMeasures.size(); ++m) {
            auto& v = o.duration(kMeasures[m]);
            if (!v) continue;
            if (*v < kMinDurationMs) {
                v.reset();
                ++local.removed_fields[m];
            } else {
                *v = std::log(*v);
            }
        }
        o.log_scaled = true;
        if (!o.has_any_duration()) {
            ++local.emptied_rows;
            continue;
        }
        out.push_back(std::move(o));
    }
    if (stats) *stats = local;
    return out;
}

AlignmentFilterResult drop_cross_sentence_alignments(std::vector<BehavioralObservation> obs) {
    AlignmentFilterResult result;
    result.kept.reserve(obs.size());
    for (auto& o : obs) {
        if (o.source_sentences.size() > 1 || o.target_sentences.size() > 1)
            ++result.dropped;
        else
            result.kept.push_back(std::move(o));
    }
    return result;
}

int FoldAssignment::fold(const std::string& sentence_id) const {
    auto it = fold_of.find(sentence_id);
    if (it == fold_of.end()) throw FoldError("sentence '" + sentence_id + "' has no fold");
    return it->second;
}

FoldAssignment assign_folds(const std::vector<std::string>& sentence_ids, int k, std::uint64_t seed,
                            const std::map<std::string, std::string>* strata) {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    std::vector<std::string> ids = sentence_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) throw ConfigError("no sentences to assign to folds");
    if (static_cast<int>(ids.size()) < k)
        throw ConfigError("only " + std::to_string(ids.size()) + " sentences for " + std::to_string(k) +
                          " folds");

    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& id : ids) {
        std::string stratum;
        if (strata) {
            auto it = strata->find(id);
            if (it != strata->end()) stratum = it->second;
        }
        groups[stratum].push_back(id);
    }

    FoldAssignment out;
    out.folds = k;
    out.seed = seed;
    Rng rng(seed, "folds");
    std::size_t dealt = 0;
    for (auto& [stratum, members] : groups) {
        rng.shuffle(members);
        for (const auto& id : members) out.fold_of[id] = static_cast<int>(dealt++ % k);
    }
    return out;
}

}  // namespace tdiff
