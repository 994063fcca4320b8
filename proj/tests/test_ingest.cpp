#include "doctest.h"

#include <cmath>
#include <set>

#include "support.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/ingest.hpp"

using namespace tdiff;

namespace {

StudyTables tables_with(const std::string& unit_file) {
    StudyTables t;
    t.sentences = testing::fixtures() / "tables" / "sentences.tsv";
    t.units.push_back({testing::fixtures() / "tables" / unit_file, UnitLevel::word, std::nullopt, ""});
    return t;
}

}  // namespace

TEST_CASE("five-row mini table parses into five observations") {
    ParsedCorpus c = parse_tables(tables_with("mini_words.tsv"));
    REQUIRE(c.sentences.size() == 3);
    REQUIRE(c.observations.size() == 5);
    CHECK(c.rejects.empty());

    const auto& a = c.observations[0];
    CHECK(a.id == "mini_words.tsv:2");
    CHECK(a.study_id == "BML12");
    CHECK(a.participant_id == "P01");
    CHECK(a.language_pair == "en-da");
    CHECK(a.source_sentence_id == "S1");
    CHECK(a.unit.side == Side::source);
    CHECK(a.unit.indices == IndexSet{2});
    REQUIRE(a.aligned);
    CHECK(a.aligned->side == Side::target);
    CHECK(*a.trt_s == 250.0);
    CHECK_FALSE(a.trt_t);
    CHECK(*a.pos_tag == "NOUN");

    const auto& b = c.observations[1];
    CHECK(b.aligned->indices == IndexSet{1, 2});
    CHECK(*b.dur == 900.0);

    const auto& d = c.observations[3];
    CHECK(d.unit.indices == IndexSet{1, 3});
    CHECK_FALSE(d.aligned);
    CHECK_FALSE(d.pos_tag);

    CHECK(c.observations[4].language_pair == "en-de");
    CHECK(*c.observations[4].dur == 640.5);
    REQUIRE(c.sentences.at("p1").pos_tags);
    CHECK(c.sentences.at("p1").pos_tags->at(1) == "NOUN");
}

TEST_CASE("missing mandatory column is a configuration error") {
    CHECK_THROWS_AS(parse_tables(tables_with("missing_column.tsv")), ConfigError);
}

TEST_CASE("malformed rows are collected as rejects") {
    ParsedCorpus c = parse_tables(tables_with("rejects.tsv"));
    // the zero-only row reports its field and then the empty row
    REQUIRE(c.rejects.size() == 6);
    CHECK(c.rejects[0].reason.find("unresolvable") != std::string::npos);
    CHECK(c.rejects[1].reason.find("bad unit") != std::string::npos);
    CHECK(c.rejects[2].reason.find("non-positive") != std::string::npos);
    CHECK(c.rejects[3].reason.find("no valid duration") != std::string::npos);
    CHECK(c.rejects[4].reason.find("malformed") != std::string::npos);
    CHECK(c.rejects[5].line == 6);
    std::set<std::size_t> lines;
    for (const auto& r : c.rejects) lines.insert(r.line);
    CHECK(lines == std::set<std::size_t>{2, 3, 4, 5, 6});
    REQUIRE(c.observations.size() == 1);
    CHECK(*c.observations[0].dur == 300.0);
    CHECK_FALSE(c.observations[0].trt_t);
}

TEST_CASE("filter_and_scale works field by field") {
    auto obs = [](std::optional<double> s, std::optional<double> t, std::optional<double> d) {
        BehavioralObservation o;
        o.id = "x";
        o.trt_s = s;
        o.trt_t = t;
        o.dur = d;
        return o;
    };
    FilterStats stats;
    auto out = filter_and_scale({obs(std::nullopt, std::nullopt, 19.0), obs(std::nullopt, std::nullopt, 20.0),
                                 obs(15.0, std::nullopt, 100.0)},
                                &stats);
    REQUIRE(out.size() == 2);
    CHECK(out[0].dur.value() == doctest::Approx(2.9957).epsilon(1e-4));
    CHECK(*out[0].dur == std::log(20.0));
    CHECK_FALSE(out[1].trt_s);
    CHECK(*out[1].dur == std::log(100.0));
    CHECK(stats.removed_fields[0] == 1);
    CHECK(stats.removed_fields[2] == 1);
    CHECK(stats.emptied_rows == 1);
    CHECK_THROWS_AS(filter_and_scale(out), ContractError);
}

TEST_CASE("every surviving duration is at least ln 20") {
    Rng rng(4, "durations");
    std::vector<BehavioralObservation> obs;
    for (int i = 0; i < 500; ++i) {
        BehavioralObservation o;
        o.id = std::to_string(i);
        o.trt_s = rng.uniform() * 60.0;
        o.dur = rng.uniform() * 60.0;
        obs.push_back(o);
    }
    for (const auto& o : filter_and_scale(obs))
        for (Measure m : kMeasures)
            if (o.duration(m)) CHECK(*o.duration(m) >= std::log(20.0));
}

TEST_CASE("cross-sentence alignments are dropped and counted") {
    ParsedCorpus c = parse_tables(tables_with("crossing.tsv"));
    REQUIRE(c.observations.size() == 10);
    auto r = drop_cross_sentence_alignments(c.observations);
    CHECK(r.kept.size() == 8);
    CHECK(r.dropped == 2);
}

TEST_CASE("fold assignment is a balanced, deterministic partition") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("s" + std::to_string(i));
    auto a = assign_folds(ids, 10, 99);
    auto b = assign_folds(ids, 10, 99);
    CHECK(a.fold_of == b.fold_of);
    std::map<int, int> sizes;
    for (const auto& [id, f] : a.fold_of) ++sizes[f];
    REQUIRE(sizes.size() == 10);
    for (const auto& [f, n] : sizes) CHECK(n == 10);
    CHECK(a.fold_of.size() == ids.size());
    CHECK(assign_folds(ids, 10, 100).fold_of != a.fold_of);

    std::vector<std::string> odd(ids.begin(), ids.begin() + 23);
    std::map<int, int> odd_sizes;
    for (const auto& [id, f] : assign_folds(odd, 10, 1).fold_of) ++odd_sizes[f];
    int lo = 100, hi = 0;
    for (const auto& [f, n] : odd_sizes) lo = std::min(lo, n), hi = std::max(hi, n);
    CHECK(hi - lo <= 1);

    CHECK_THROWS_AS(assign_folds({"a", "b"}, 10, 1), ConfigError);
    CHECK_THROWS_AS(assign_folds(ids, 1, 1), ConfigError);
    CHECK_THROWS_AS(a.fold("nope"), FoldError);
}

TEST_CASE("observations of one sentence share a fold") {
    ParsedCorpus c = parse_tables(tables_with("mini_words.tsv"));
    std::vector<std::string> ids;
    for (const auto& [id, s] : c.sentences) ids.push_back(s.source_sentence_id);
    auto folds = assign_folds(ids, 2, 3);
    // p1 and p3 translate the same source sentence
    CHECK(folds.fold(c.observations[0].source_sentence_id) == folds.fold(c.observations[4].source_sentence_id));
}

TEST_CASE("stratified folds spread each stratum") {
    std::vector<std::string> ids;
    std::map<std::string, std::string> strata;
    for (int i = 0; i < 40; ++i) {
        ids.push_back("s" + std::to_string(i));
        strata[ids.back()] = i < 20 ? "en-da" : "en-de";
    }
    auto f = assign_folds(ids, 4, 8, &strata);
    std::map<std::pair<std::string, int>, int> cells;
    for (const auto& [id, k] : f.fold_of) ++cells[{strata[id], k}];
    for (const auto& [key, n] : cells) CHECK(n == 5);
}

TEST_CASE("observation serialization round trips") {
    ParsedCorpus c = parse_tables(tables_with("mini_words.tsv"));
    auto scaled = filter_and_scale(c.observations);
    auto text = serialize_observations(scaled);
    auto back = parse_observations(text);
    CHECK(back == scaled);
    CHECK(serialize_observations(back) == text);
    CHECK(parse_sentences(serialize_sentences(c.sentences)) == c.sentences);
}

TEST_CASE("sample counts are per language pair, level and measure") {
    ParsedCorpus c = parse_tables(tables_with("mini_words.tsv"));
    auto counts = sample_counts(filter_and_scale(c.observations));
    CHECK(counts["en-da\tword\tDur"] == 2);
    CHECK(counts["en-da\tword\tTrtT"] == 1);
    CHECK(counts["en-de\tword\tTrtT"] == 1);
    CHECK(counts["en-da\tword\tTrtS"] == 1);
}
