#pragma once

// File layout of a run directory and helpers shared by the stage runners.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tdiff/features.hpp"
#include "tdiff/ingest.hpp"
#include "tdiff/pipeline.hpp"

namespace tdiff::layout {

namespace fs = std::filesystem;

inline fs::path ingest_dir(const fs::path& run) { return run / "ingest"; }
inline fs::path extract_dir(const fs::path& run) { return run / "extract"; }
inline fs::path fit_dir(const fs::path& run) { return run / "fit"; }
inline fs::path evaluate_dir(const fs::path& run) { return run / "evaluate"; }
inline fs::path report_dir(const fs::path& run) { return run / "report"; }

fs::path resolve(const RunConfig& config, const fs::path& p);
fs::path run_dir(const RunConfig& config);

// Feature rows keyed by (observation id, side).
using FeatureTable = std::map<std::pair<std::string, Side>, FeatureVector>;

std::string render_features(const FeatureTable& table);
FeatureTable read_features(const fs::path& file);

std::map<std::string, int> read_folds(const fs::path& file);

struct Cell {
    Measure measure;
    UnitLevel level;
    std::string scope;  // "all" or a language pair

    std::string key() const;       // tab-joined, as it appears in result tables
    std::string file_stem() const; // safe for file names
};

std::vector<Cell> cells(const RunConfig& config);

struct ModelDef {
    std::string name;
    std::vector<Feature> predictors;  // excluding the intercept
};

struct Comparison {
    std::string feature;     // tested predictor (attention feature for supplementary)
    std::string model;
    std::string reference;
    std::string kind;        // "baseline" or "surprisal"
};

// Models fitted in every cell of a measure, baseline first.
std::vector<ModelDef> models_for(const RunConfig& config, Measure measure);
std::vector<Comparison> comparisons_for(const RunConfig& config, Measure measure);

// The unit on the measure's side, if the observation has one.
const SegmentRef* unit_on(const BehavioralObservation& obs, Side side);

void require_dir(const fs::path& dir, const char* stage);

}  // namespace tdiff::layout
