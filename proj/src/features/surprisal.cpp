#include "tdiff/features.hpp"

namespace tdiff {

SurprisalSum surprisal_sum(const TokenLogProbs& logprobs, const IndexSet& positions) {
    SurprisalSum out;
    for (int p : positions) {
        out.total -= logprobs.at_position(p);
        ++out.count;
    }
    // -0.0 for certain tokens reads badly in tables
    if (out.total == 0.0) out.total = 0.0;
    return out;
}

double lm_surprisal(const TokenLogProbs& logprobs, const IndexSet& positions) {
    if (positions.empty()) throw DomainError("surprisal of an empty segment");
    return surprisal_sum(logprobs, positions).mean();
}

double mt_surprisal(const TokenLogProbs& logprobs, const IndexSet& positions, Side side) {
    if (side == Side::source)
        throw UnsupportedError("translation surprisal is only defined for target segments");
    return lm_surprisal(logprobs, positions);
}

}  // namespace tdiff
