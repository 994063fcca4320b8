#include <iostream>

#include "json.hpp"

#include "run_layout.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/rng.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr Stage kStages[] = {Stage::ingest, Stage::extract, Stage::fit, Stage::evaluate, Stage::report};

fs::path stage_dir(const fs::path& run, Stage s) {
    switch (s) {
        case Stage::ingest: return layout::ingest_dir(run);
        case Stage::extract: return layout::extract_dir(run);
        case Stage::fit: return layout::fit_dir(run);
        case Stage::evaluate: return layout::evaluate_dir(run);
        default: return layout::report_dir(run);
    }
}

json fresh_manifest(const RunConfig& config) {
    const std::uint64_t seed = config.master_seed();
    json m;
    m["tool"] = "tdiff";
    m["manifest_version"] = 1;
    m["config_hash"] = config_hash(config);
    m["config"] = config_to_json(config);
    json seeds;
    seeds["master"] = seed;
    seeds["folds"] = substream_seed(seed, "folds");
    seeds["bootstrap_source"] = substream_seed(seed, "pos:source");
    seeds["bootstrap_target"] = substream_seed(seed, "pos:target");
    seeds["permutation"] = "per comparison: substream 'permutation:<measure>\\t<level>\\t<scope>:<model>:<reference>'";
    m["seeds"] = seeds;
    json stages;
    for (Stage s : kStages) stages[to_string(s)] = "pending";
    m["stages"] = stages;
    return m;
}

void save(const fs::path& run, const json& manifest) { write_file(run / "manifest.json", manifest.dump(2) + "\n"); }

}  // namespace

const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::extract: return "extract";
        case Stage::fit: return "fit";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
        case Stage::all: return "all";
    }
    return "?";
}

Stage stage_from_string(const std::string& text) {
    for (Stage s : {Stage::ingest, Stage::extract, Stage::fit, Stage::evaluate, Stage::report, Stage::all})
        if (text == to_string(s)) return s;
    throw ConfigError("unknown stage '" + text + "'");
}

void run_pipeline(const RunConfig& config, Stage stage, const RunOptions& options) {
    validate_config(config);
    const fs::path run = layout::run_dir(config);
    std::vector<Stage> todo;
    for (Stage s : kStages)
        if (stage == Stage::all || stage == s) todo.push_back(s);

    json manifest = fresh_manifest(config);
    const fs::path manifest_path = run / "manifest.json";
    if (fs::exists(manifest_path)) {
        json existing;
        try {
            existing = json::parse(read_file(manifest_path));
        } catch (const nlohmann::json::exception&) {
            if (!options.force) throw ConfigError("run manifest in " + run.string() + " is unreadable; use --force");
        }
        bool same = existing.is_object() && existing.value("config_hash", "") == manifest["config_hash"];
        if (!same && !options.force && stage != Stage::all && stage != Stage::ingest)
            throw ConfigError("run directory " + run.string() + " was produced by a different config; use --force");
        if (same && existing.contains("stages")) manifest["stages"] = existing["stages"];
    }
    for (Stage s : todo) {
        if (fs::exists(stage_dir(run, s))) {
            if (!options.force)
                throw ConfigError(std::string("outputs of stage '") + to_string(s) + "' already exist in " +
                                  run.string() + "; use --force to overwrite");
        }
    }
    for (Stage s : todo) fs::remove_all(stage_dir(run, s));
    fs::create_directories(run);
    fs::remove(run / "failure.json");

    for (Stage s : todo) {
        manifest["stages"][to_string(s)] = "running";
        save(run, manifest);
        try {
            switch (s) {
                case Stage::ingest: stage_ingest(config, run); break;
                case Stage::extract: stage_extract(config, run, options.jobs); break;
                case Stage::fit: stage_fit(config, run, options.jobs); break;
                case Stage::evaluate: stage_evaluate(config, run, options.jobs); break;
                default: render_report(run); break;
            }
        } catch (const std::exception& e) {
            manifest["stages"][to_string(s)] = "failed";
            save(run, manifest);
            json failure;
            failure["stage"] = to_string(s);
            failure["error"] = e.what();
            write_file(run / "failure.json", failure.dump(2) + "\n");
            throw StageError(s, std::string("stage '") + to_string(s) + "' failed: " + e.what());
        }
        manifest["stages"][to_string(s)] = "done";
        save(run, manifest);
    }
}

}  // namespace tdiff
