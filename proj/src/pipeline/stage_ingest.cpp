#include "json.hpp"

#include "run_layout.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/parallel.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void stage_ingest(const RunConfig& config, const fs::path& run) {
    StudyTables tables = config.tables;
    tables.sentences = layout::resolve(config, tables.sentences);
    for (auto& u : tables.units) u.file = layout::resolve(config, u.file);

    ParsedCorpus corpus = parse_tables(tables);
    const std::size_t parsed = corpus.observations.size();
    FilterStats stats;
    auto scaled = filter_and_scale(std::move(corpus.observations), &stats);
    auto aligned = drop_cross_sentence_alignments(std::move(scaled));

    std::vector<std::string> sentence_ids;
    std::map<std::string, std::string> strata;
    for (const auto& [id, s] : corpus.sentences) {
        sentence_ids.push_back(s.source_sentence_id);
        strata[s.source_sentence_id] = s.language_pair;
    }
    FoldAssignment folds =
        assign_folds(sentence_ids, config.folds, config.master_seed(), config.stratify_folds ? &strata : nullptr);

    fs::path dir = layout::ingest_dir(run);
    fs::create_directories(dir);
    write_file(dir / "sentences.jsonl", serialize_sentences(corpus.sentences));
    write_file(dir / "observations.jsonl", serialize_observations(aligned.kept));
    write_file(dir / "rejects.tsv", serialize_rejects(corpus.rejects));

    std::vector<std::vector<std::string>> fold_rows;
    for (const auto& [id, f] : folds.fold_of) fold_rows.push_back({id, std::to_string(f)});
    write_file(dir / "folds.tsv", render_tsv({"sentence_id", "fold"}, fold_rows));

    std::vector<std::vector<std::string>> count_rows;
    for (const auto& [key, n] : sample_counts(aligned.kept)) {
        auto parts = split(key, '\t');
        parts.push_back(std::to_string(n));
        count_rows.push_back(std::move(parts));
    }
    write_file(dir / "counts.tsv", render_tsv({"language_pair", "level", "measure", "n"}, count_rows));

    json summary;
    summary["sentences"] = corpus.sentences.size();
    summary["observations_parsed"] = parsed;
    summary["rows_rejected"] = corpus.rejects.size();
    json removed;
    for (std::size_t i = 0; i < kMeasures.size(); ++i) removed[to_string(kMeasures[i])] = stats.removed_fields[i];
    summary["durations_below_threshold"] = removed;
    summary["rows_without_duration"] = stats.emptied_rows;
    summary["cross_sentence_dropped"] = aligned.dropped;
    summary["observations_kept"] = aligned.kept.size();
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

void stage_extract(const RunConfig& config, const fs::path& run, int jobs) {
    fs::path in = layout::ingest_dir(run);
    layout::require_dir(in, "ingest");
    auto sentences = parse_sentences(read_file(in / "sentences.jsonl"));
    auto observations = parse_observations(read_file(in / "observations.jsonl"));

    fs::path dump_dir = layout::resolve(config, config.dumps);
    DumpManifest manifest = read_manifest(dump_dir);
    std::map<std::string, std::string> dump_file;
    for (const auto& e : manifest.pairs) dump_file[e.pair_id] = e.file;
    std::map<std::string, std::string> export_failure;
    for (const auto& f : manifest.failures) export_failure[f.pair_id] = f.reason;

    FrequencyTable freq = FrequencyTable::load(layout::resolve(config, config.frequency));

    // Work is grouped by sentence pair so each dump is read once.
    std::map<std::string, std::vector<std::size_t>> by_pair;
    for (std::size_t i = 0; i < observations.size(); ++i) by_pair[observations[i].pair_id].push_back(i);
    std::vector<std::string> pair_ids;
    for (const auto& [id, v] : by_pair) pair_ids.push_back(id);

    struct Diagnostic {
        std::string obs_id, side, kind, message;
    };
    struct PairResult {
        std::vector<std::pair<std::pair<std::string, Side>, FeatureVector>> rows;
        std::vector<Diagnostic> diagnostics;
    };
    std::vector<PairResult> results(pair_ids.size());

    parallel_for(pair_ids.size(), jobs, [&](std::size_t p) {
        const std::string& pair_id = pair_ids[p];
        PairResult& out = results[p];
        auto fail_all = [&](const std::string& kind, const std::string& message) {
            for (std::size_t i : by_pair.at(pair_id)) out.diagnostics.push_back({observations[i].id, "", kind, message});
        };
        auto sit = sentences.find(pair_id);
        if (sit == sentences.end()) return fail_all("missing_sentence", "pair " + pair_id + " has no sentence record");
        auto dit = dump_file.find(pair_id);
        if (dit == dump_file.end()) {
            auto f = export_failure.find(pair_id);
            return fail_all("missing_dump", f != export_failure.end() ? "export failed: " + f->second
                                                                      : "pair " + pair_id + " has no dump");
        }
        ModelDump dump;
        DumpMaps maps;
        try {
            std::vector<DumpWarning> warnings;
            dump = read_dump(dump_dir / dit->second, &warnings);
            for (const auto& w : warnings) out.diagnostics.push_back({"", "", "dump_warning", pair_id + ": " + w.message});
            maps = build_maps(dump, sit->second);
        } catch (const Error& e) {
            return fail_all("dump_error", e.what());
        }
        for (const auto* m : {&maps.nmt_source, &maps.nmt_target, &maps.lm_source, &maps.lm_target})
            if (!m->orphans.empty())
                out.diagnostics.push_back({"", "", "orphan_subwords", pair_id + ": positions " + m->orphans.to_string()});

        for (std::size_t i : by_pair.at(pair_id)) {
            const auto& obs = observations[i];
            for (Side side : {Side::source, Side::target}) {
                const SegmentRef* unit = layout::unit_on(obs, side);
                if (!unit) continue;
                try {
                    std::vector<std::string> oov;
                    FeatureVector fv = extract_features(dump, maps, sit->second, *unit, freq, &oov);
                    if (!oov.empty()) out.diagnostics.push_back({obs.id, to_string(side), "oov", join(oov, " ")});
                    out.rows.push_back({{obs.id, side}, fv});
                } catch (const Error& e) {
                    out.diagnostics.push_back({obs.id, to_string(side), "feature_error", e.what()});
                }
            }
        }
    });

    layout::FeatureTable table;
    std::vector<std::vector<std::string>> diag_rows;
    std::size_t failures = 0;
    for (auto& r : results) {
        for (auto& [key, fv] : r.rows) table[key] = fv;
        for (auto& d : r.diagnostics) {
            if (d.kind != "oov" && d.kind != "orphan_subwords" && d.kind != "dump_warning") ++failures;
            diag_rows.push_back({d.obs_id, d.side, d.kind, d.message});
        }
    }
    fs::path dir = layout::extract_dir(run);
    fs::create_directories(dir);
    write_file(dir / "features.tsv", layout::render_features(table));
    write_file(dir / "diagnostics.tsv", render_tsv({"obs_id", "side", "kind", "message"}, diag_rows));
    json summary;
    summary["feature_rows"] = table.size();
    summary["failures"] = failures;
    summary["diagnostics"] = diag_rows.size();
    summary["dump_lm"] = manifest.lm_model;
    summary["dump_nmt"] = manifest.nmt_model;
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace tdiff
