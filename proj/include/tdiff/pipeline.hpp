#pragma once

// End-to-end orchestration: config, stage runners and the report renderer.
// Each stage reads only the serialized outputs of the stages before it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tdiff/evaluation.hpp"
#include "tdiff/features.hpp"
#include "tdiff/ingest.hpp"

namespace tdiff {

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this

    StudyTables tables;
    std::filesystem::path dumps;
    std::filesystem::path frequency;
    std::filesystem::path output;

    std::optional<std::uint64_t> seed;
    int folds = 10;
    bool stratify_folds = false;

    std::vector<UnitLevel> levels{UnitLevel::word, UnitLevel::segment};
    std::vector<Measure> measures{Measure::TrtS, Measure::TrtT, Measure::Dur};
    // Predictors tested against the baseline, per measure. Defaults: surprisal
    // and the attention features of the measure's side.
    std::map<Measure, std::vector<Feature>> features;
    std::vector<Feature> baseline{kControlFeatures.begin(), kControlFeatures.end()};
    bool supplementary = true;

    bool scope_all = true;
    std::vector<std::string> language_pairs;  // per-pair scopes
    ModelKind all_model = ModelKind::mixed;
    ModelKind pair_model = ModelKind::ols;
    ModelSpec model;  // heldout mode and optimizer options

    int n_perm = 1000;
    Sidedness sidedness = Sidedness::greater;
    bool fold_level_test = false;
    int n_boot = 1000;

    std::uint64_t master_seed() const;
    const std::vector<Feature>& features_for(Measure m) const;
};

std::vector<Feature> default_features(Measure measure);

// Parses and resolves a config file. Throws ConfigError on malformed content.
RunConfig load_config(const std::filesystem::path& file);
RunConfig config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir);

// Effective config with every default spelled out; paths as given, relative to base_dir.
nlohmann::ordered_json config_to_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);

// Checks the seed and every referenced input path before any computation.
void validate_config(const RunConfig& config);

enum class Stage { ingest, extract, fit, evaluate, report, all };
const char* to_string(Stage stage);
Stage stage_from_string(const std::string& text);

struct RunOptions {
    int jobs = 1;
    bool force = false;
};

// Runs one stage (or all in order) into config.output. A stage error leaves the
// outputs of finished stages, writes failure.json naming the stage and rethrows
// as StageError.
void run_pipeline(const RunConfig& config, Stage stage, const RunOptions& options = {});

class StageError : public Error {
public:
    StageError(Stage stage, const std::string& what) : Error(what), stage_(stage) {}
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

// Summary document and plot-data tables from the run directory; reads only
// result tables. Throws FormatError when the run manifest is unreadable.
void render_report(const std::filesystem::path& run_dir);

// Individual stages, exposed for tests.
void stage_ingest(const RunConfig& config, const std::filesystem::path& run_dir);
void stage_extract(const RunConfig& config, const std::filesystem::path& run_dir, int jobs);
void stage_fit(const RunConfig& config, const std::filesystem::path& run_dir, int jobs);
void stage_evaluate(const RunConfig& config, const std::filesystem::path& run_dir, int jobs);

// Model names used throughout the result tables.
std::string baseline_model_name();
std::string feature_model_name(Feature f);
std::string supplementary_model_name(Feature surprisal, Feature attention);

}  // namespace tdiff
