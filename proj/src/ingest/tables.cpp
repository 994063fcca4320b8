#include <algorithm>

#include "json.hpp"

#include "tdiff/errors.hpp"
#include "tdiff/ingest.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

using nlohmann::ordered_json;

const char* to_string(UnitLevel level) {
    return level == UnitLevel::word ? "word" : "segment";
}

UnitLevel level_from_string(const std::string& text) {
    if (text == "word" || text == "token") return UnitLevel::word;
    if (text == "segment") return UnitLevel::segment;
    throw ConfigError("unknown unit level '" + text + "'");
}

const char* to_string(Measure measure) {
    switch (measure) {
        case Measure::TrtS: return "TrtS";
        case Measure::TrtT: return "TrtT";
        case Measure::Dur: return "Dur";
    }
    return "?";
}

Measure measure_from_string(const std::string& text) {
    for (Measure m : kMeasures)
        if (text == to_string(m)) return m;
    throw ConfigError("unknown measure '" + text + "'");
}

Side measure_side(Measure measure) {
    return measure == Measure::TrtS ? Side::source : Side::target;
}

std::optional<double>& BehavioralObservation::duration(Measure measure) {
    switch (measure) {
        case Measure::TrtS: return trt_s;
        case Measure::TrtT: return trt_t;
        case Measure::Dur: return dur;
    }
    return dur;
}

const std::optional<double>& BehavioralObservation::duration(Measure measure) const {
    return const_cast<BehavioralObservation*>(this)->duration(measure);
}

namespace {

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (auto& t : split(text, ' '))
        if (!t.empty()) out.push_back(t);
    return out;
}

std::vector<std::string> split_ids(const std::string& text) {
    std::vector<std::string> out;
    for (auto& part : split(text, '+')) {
        auto t = trim(part);
        if (!t.empty() && t != "---" && t != "NA" &&
            std::find(out.begin(), out.end(), t) == out.end())
            out.push_back(t);
    }
    return out;
}

struct RowReader {
    const Table& table;
    std::size_t row;

    std::string get(std::optional<std::size_t> col) const {
        if (!col || *col >= table.rows[row].size()) return {};
        return trim(table.rows[row][*col]);
    }
};

void parse_sentence_table(const std::filesystem::path& path, const ColumnSchema& cols,
                          ParsedCorpus& corpus) {
    Table t = read_tsv(path);
    const std::string ctx = path.filename().string();
    auto c_pair = t.require_column(cols.sentence_pair, ctx);
    auto c_sid = t.require_column(cols.sentence_id, ctx);
    auto c_lang = t.require_column(cols.sentence_language_pair, ctx);
    auto c_src = t.require_column(cols.sentence_source, ctx);
    auto c_tgt = t.require_column(cols.sentence_target, ctx);
    auto c_pos = t.column(cols.sentence_pos);

    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        RowReader row{t, r};
        const std::size_t line = t.line_numbers[r];
        SentencePair sp;
        sp.pair_id = row.get(c_pair);
        sp.source_sentence_id = row.get(c_sid);
        sp.language_pair = row.get(c_lang);
        sp.source_tokens = split_tokens(row.get(c_src));
        sp.target_tokens = split_tokens(row.get(c_tgt));
        if (sp.pair_id.empty() || sp.source_sentence_id.empty()) {
            corpus.rejects.push_back({ctx, line, "sentence row without pair or sentence id"});
            continue;
        }
        if (sp.source_tokens.empty() || sp.target_tokens.empty()) {
            corpus.rejects.push_back({ctx, line, "empty source or target sentence"});
            continue;
        }
        if (c_pos) {
            auto tags = split_tokens(row.get(c_pos));
            if (!tags.empty()) {
                if (tags.size() != sp.source_tokens.size()) {
                    corpus.rejects.push_back({ctx, line, "PoS tag count differs from source token count"});
                    continue;
                }
                sp.pos_tags = std::move(tags);
            }
        }
        if (corpus.sentences.count(sp.pair_id)) {
            corpus.rejects.push_back({ctx, line, "duplicate pair id '" + sp.pair_id + "'"});
            continue;
        }
        corpus.sentences.emplace(sp.pair_id, std::move(sp));
    }
}

void parse_unit_table(const UnitTableSpec& spec, const ColumnSchema& cols, ParsedCorpus& corpus) {
    Table t = read_tsv(spec.file);
    const std::string ctx = spec.file.filename().string();
    auto c_part = t.require_column(cols.participant, ctx);
    auto c_pair = t.require_column(cols.pair, ctx);
    auto c_unit = t.require_column(cols.unit, ctx);
    std::optional<std::size_t> c_side;
    if (spec.side)
        c_side = t.column(cols.side);
    else
        c_side = t.require_column(cols.side, ctx);
    auto c_study = t.column(cols.study);
    auto c_aligned = t.column(cols.aligned);
    auto c_ssent = t.column(cols.source_sentences);
    auto c_tsent = t.column(cols.target_sentences);
    auto c_pos = t.column(cols.pos);
    const std::array<std::optional<std::size_t>, 3> c_dur{t.column(cols.trt_s), t.column(cols.trt_t),
                                                          t.column(cols.dur)};
    if (!c_dur[0] && !c_dur[1] && !c_dur[2])
        throw ConfigError("table " + ctx + " has none of the duration columns " + cols.trt_s + ", " +
                          cols.trt_t + ", " + cols.dur);

    const std::string study_fallback = spec.study.empty() ? spec.file.stem().string() : spec.study;

    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        RowReader row{t, r};
        const std::size_t line = t.line_numbers[r];
        auto reject = [&](std::string reason) { corpus.rejects.push_back({ctx, line, std::move(reason)}); };

        BehavioralObservation o;
        o.id = ctx + ":" + std::to_string(line);
        o.level = spec.level;
        o.participant_id = row.get(c_part);
        o.pair_id = row.get(c_pair);
        o.study_id = c_study ? row.get(c_study) : study_fallback;
        if (o.study_id.empty()) o.study_id = study_fallback;
        if (o.participant_id.empty()) {
            reject("missing participant id");
            continue;
        }
        auto sp_it = corpus.sentences.find(o.pair_id);
        if (sp_it == corpus.sentences.end()) {
            reject("unresolvable sentence reference '" + o.pair_id + "'");
            continue;
        }
        const SentencePair& sp = sp_it->second;
        o.language_pair = sp.language_pair;
        o.source_sentence_id = sp.source_sentence_id;

        try {
            o.unit.side = c_side && !row.get(c_side).empty() ? side_from_string(row.get(c_side))
                                                             : spec.side.value_or(Side::source);
            o.unit.indices = IndexSet::parse(row.get(c_unit));
            o.unit.validate(sp.length(o.unit.side));
        } catch (const Error& e) {
            reject(std::string("bad unit: ") + e.what());
            continue;
        }

        o.source_sentences = split_ids(row.get(c_ssent));
        o.target_sentences = split_ids(row.get(c_tsent));

        if (c_aligned) {
            try {
                const std::string text = row.get(c_aligned);
                IndexSet aligned = text == "---" || text == "NA" ? IndexSet{} : IndexSet::parse(text);
                if (!aligned.empty()) {
                    SegmentRef a{o.unit.side == Side::source ? Side::target : Side::source, aligned};
                    const bool crossing = o.source_sentences.size() > 1 || o.target_sentences.size() > 1;
                    if (!crossing) a.validate(sp.length(a.side));
                    o.aligned = std::move(a);
                }
            } catch (const Error& e) {
                reject(std::string("bad alignment: ") + e.what());
                continue;
            }
        }

        bool malformed = false;
        for (std::size_t m = 0; m < kMeasures.size(); ++m) {
            if (!c_dur[m]) continue;
            try {
                auto v = parse_number(row.get(c_dur[m]));
                if (v && *v <= 0.0) {
                    reject(std::string("non-positive ") + to_string(kMeasures[m]) + " value " +
                           format_number(*v) + " (below 20ms floor)");
                    v.reset();
                }
                o.duration(kMeasures[m]) = v;
            } catch (const Error& e) {
                reject(std::string("malformed ") + to_string(kMeasures[m]) + ": " + e.what());
                malformed = true;
                break;
            }
        }
        if (malformed) continue;
        if (!o.has_any_duration()) {
            reject("no valid duration");
            continue;
        }

        if (c_pos) {
            auto tag = row.get(c_pos);
            if (!tag.empty() && tag != "---" && tag != "NA") o.pos_tag = tag;
        }
        corpus.observations.push_back(std::move(o));
    }
}

ordered_json to_json(const IndexSet& s) { return s.members(); }

IndexSet index_set_from_json(const ordered_json& j) { return IndexSet(j.get<std::vector<int>>()); }

ordered_json optional_number(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> number_from_json(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

ParsedCorpus parse_tables(const StudyTables& tables) {
    ParsedCorpus corpus;
    parse_sentence_table(tables.sentences, tables.columns, corpus);
    for (const auto& spec : tables.units) parse_unit_table(spec, tables.columns, corpus);
    return corpus;
}

std::string serialize_sentences(const std::map<std::string, SentencePair>& sentences) {
    std::string out;
    for (const auto& [id, sp] : sentences) {
        ordered_json j;
        j["pair_id"] = sp.pair_id;
        j["source_sentence_id"] = sp.source_sentence_id;
        j["language_pair"] = sp.language_pair;
        j["source_tokens"] = sp.source_tokens;
        j["target_tokens"] = sp.target_tokens;
        j["pos_tags"] = sp.pos_tags ? ordered_json(*sp.pos_tags) : ordered_json(nullptr);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, SentencePair> parse_sentences(const std::string& text) {
    std::map<std::string, SentencePair> out;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        auto j = ordered_json::parse(line);
        SentencePair sp;
        sp.pair_id = j.at("pair_id").get<std::string>();
        sp.source_sentence_id = j.at("source_sentence_id").get<std::string>();
        sp.language_pair = j.at("language_pair").get<std::string>();
        sp.source_tokens = j.at("source_tokens").get<std::vector<std::string>>();
        sp.target_tokens = j.at("target_tokens").get<std::vector<std::string>>();
        if (!j.at("pos_tags").is_null()) sp.pos_tags = j.at("pos_tags").get<std::vector<std::string>>();
        out.emplace(sp.pair_id, std::move(sp));
    }
    return out;
}

std::string serialize_observations(const std::vector<BehavioralObservation>& obs) {
    std::string out;
    for (const auto& o : obs) {
        ordered_json j;
        j["id"] = o.id;
        j["study"] = o.study_id;
        j["participant"] = o.participant_id;
        j["language_pair"] = o.language_pair;
        j["level"] = to_string(o.level);
        j["pair_id"] = o.pair_id;
        j["source_sentence_id"] = o.source_sentence_id;
        j["side"] = to_string(o.unit.side);
        j["unit"] = to_json(o.unit.indices);
        j["aligned"] = o.aligned ? to_json(o.aligned->indices) : ordered_json(nullptr);
        j["source_sentences"] = o.source_sentences;
        j["target_sentences"] = o.target_sentences;
        j["TrtS"] = optional_number(o.trt_s);
        j["TrtT"] = optional_number(o.trt_t);
        j["Dur"] = optional_number(o.dur);
        j["pos"] = o.pos_tag ? ordered_json(*o.pos_tag) : ordered_json(nullptr);
        j["log_scaled"] = o.log_scaled;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<BehavioralObservation> parse_observations(const std::string& text) {
    std::vector<BehavioralObservation> out;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        auto j = ordered_json::parse(line);
        BehavioralObservation o;
        o.id = j.at("id").get<std::string>();
        o.study_id = j.at("study").get<std::string>();
        o.participant_id = j.at("participant").get<std::string>();
        o.language_pair = j.at("language_pair").get<std::string>();
        o.level = level_from_string(j.at("level").get<std::string>());
        o.pair_id = j.at("pair_id").get<std::string>();
        o.source_sentence_id = j.at("source_sentence_id").get<std::string>();
        o.unit.side = side_from_string(j.at("side").get<std::string>());
        o.unit.indices = index_set_from_json(j.at("unit"));
        if (!j.at("aligned").is_null())
            o.aligned = SegmentRef{o.unit.side == Side::source ? Side::target : Side::source,
                                   index_set_from_json(j.at("aligned"))};
        o.source_sentences = j.at("source_sentences").get<std::vector<std::string>>();
        o.target_sentences = j.at("target_sentences").get<std::vector<std::string>>();
        o.trt_s = number_from_json(j.at("TrtS"));
        o.trt_t = number_from_json(j.at("TrtT"));
        o.dur = number_from_json(j.at("Dur"));
        if (!j.at("pos").is_null()) o.pos_tag = j.at("pos").get<std::string>();
        o.log_scaled = j.at("log_scaled").get<bool>();
        out.push_back(std::move(o));
    }
    return out;
}

std::string serialize_rejects(const std::vector<Reject>& rejects) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : rejects) rows.push_back({r.table, std::to_string(r.line), r.reason});
    return render_tsv({"table", "line", "reason"}, rows);
}

std::map<std::string, std::size_t> sample_counts(const std::vector<BehavioralObservation>& obs) {
    std::map<std::string, std::size_t> counts;
    for (const auto& o : obs)
        for (Measure m : kMeasures)
            if (o.duration(m))
                ++counts[o.language_pair + "\t" + to_string(o.level) + "\t" + to_string(m)];
    return counts;
}

}  // namespace tdiff
