#pragma once

// Reader for translation-process study tables (word and segment level), the
// duration filter, cross-sentence alignment removal and sentence-level folds.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdiff/index_set.hpp"

namespace tdiff {

enum class UnitLevel { word, segment };
enum class Measure { TrtS, TrtT, Dur };

inline constexpr std::array<Measure, 3> kMeasures{Measure::TrtS, Measure::TrtT, Measure::Dur};
inline constexpr double kMinDurationMs = 20.0;

const char* to_string(UnitLevel level);
UnitLevel level_from_string(const std::string& text);
const char* to_string(Measure measure);
Measure measure_from_string(const std::string& text);

// Reading time of the source text is explained by source units; target reading
// time and production duration by target units.
Side measure_side(Measure measure);

struct BehavioralObservation {
    std::string id;  // "<table>:<line>", unique within a corpus
    std::string study_id;
    std::string participant_id;
    std::string language_pair;
    UnitLevel level = UnitLevel::word;
    std::string pair_id;
    std::string source_sentence_id;
    SegmentRef unit;
    std::optional<SegmentRef> aligned;
    // Sentence ids touched by the unit and its alignment, per side.
    std::vector<std::string> source_sentences;
    std::vector<std::string> target_sentences;
    std::optional<double> trt_s;
    std::optional<double> trt_t;
    std::optional<double> dur;
    std::optional<std::string> pos_tag;
    bool log_scaled = false;

    std::optional<double>& duration(Measure measure);
    const std::optional<double>& duration(Measure measure) const;
    bool has_any_duration() const { return trt_s || trt_t || dur; }

    friend bool operator==(const BehavioralObservation&, const BehavioralObservation&) = default;
};

// Logical field -> column header. Defaults follow the bundled corpora.
struct ColumnSchema {
    std::string study = "Study";
    std::string participant = "Participant";
    std::string pair = "PairId";
    std::string side = "Side";
    std::string unit = "Unit";
    std::string aligned = "Aligned";
    std::string source_sentences = "STsent";
    std::string target_sentences = "TTsent";
    std::string trt_s = "TrtS";
    std::string trt_t = "TrtT";
    std::string dur = "Dur";
    std::string pos = "PoS";

    std::string sentence_pair = "PairId";
    std::string sentence_id = "SentenceId";
    std::string sentence_language_pair = "LangPair";
    std::string sentence_source = "Source";
    std::string sentence_target = "Target";
    std::string sentence_pos = "PoS";
};

struct UnitTableSpec {
    std::filesystem::path file;
    UnitLevel level = UnitLevel::word;
    std::optional<Side> side;  // fixed side when the table has no side column
    std::string study;         // fallback when the table has no study column
};

struct StudyTables {
    std::filesystem::path sentences;
    std::vector<UnitTableSpec> units;
    ColumnSchema columns;
};

struct Reject {
    std::string table;
    std::size_t line = 0;
    std::string reason;

    friend bool operator==(const Reject&, const Reject&) = default;
};

struct ParsedCorpus {
    std::map<std::string, SentencePair> sentences;
    std::vector<BehavioralObservation> observations;
    std::vector<Reject> rejects;
};

// Throws ConfigError for a missing mandatory column; row-level problems land in rejects.
ParsedCorpus parse_tables(const StudyTables& tables);

struct FilterStats {
    std::array<std::size_t, 3> removed_fields{};  // indexed like kMeasures
    std::size_t emptied_rows = 0;
};

// Removes each duration below kMinDurationMs and replaces survivors by their natural log.
std::vector<BehavioralObservation> filter_and_scale(std::vector<BehavioralObservation> obs,
                                                    FilterStats* stats = nullptr);

struct AlignmentFilterResult {
    std::vector<BehavioralObservation> kept;
    std::size_t dropped = 0;
};

AlignmentFilterResult drop_cross_sentence_alignments(std::vector<BehavioralObservation> obs);

struct FoldAssignment {
    int folds = 10;
    std::uint64_t seed = 0;
    std::map<std::string, int> fold_of;

    int fold(const std::string& sentence_id) const;  // throws FoldError when unknown
};

// Balanced random partition of sentences into k folds. With strata, sentences are
// shuffled within each stratum and dealt round-robin so every stratum is spread.
FoldAssignment assign_folds(const std::vector<std::string>& sentence_ids, int k, std::uint64_t seed,
                            const std::map<std::string, std::string>* strata = nullptr);

// Canonical one-record-per-line serialization of sentences and observations.
std::string serialize_sentences(const std::map<std::string, SentencePair>& sentences);
std::map<std::string, SentencePair> parse_sentences(const std::string& text);
std::string serialize_observations(const std::vector<BehavioralObservation>& obs);
std::vector<BehavioralObservation> parse_observations(const std::string& text);
std::string serialize_rejects(const std::vector<Reject>& rejects);

// Per (language pair, level, measure) counts of present durations.
std::map<std::string, std::size_t> sample_counts(const std::vector<BehavioralObservation>& obs);

}  // namespace tdiff
