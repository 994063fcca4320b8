#include "run_layout.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "tdiff/errors.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff::layout {

fs::path resolve(const RunConfig& config, const fs::path& p) {
    return p.is_absolute() ? p : config.base_dir / p;
}

fs::path run_dir(const RunConfig& config) { return resolve(config, config.output); }

std::string render_features(const FeatureTable& table) {
    std::vector<std::string> header{"obs_id", "side"};
    for (auto name : kFeatureNames) header.emplace_back(name);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, fv] : table) {
        std::vector<std::string> row{key.first, to_string(key.second)};
        for (const auto& v : fv.values) row.push_back(format_number(v));
        rows.push_back(std::move(row));
    }
    return render_tsv(header, rows);
}

FeatureTable read_features(const fs::path& file) {
    Table t = read_tsv(file);
    std::size_t id_col = t.require_column("obs_id", file.string());
    std::size_t side_col = t.require_column("side", file.string());
    std::vector<std::size_t> cols;
    for (auto name : kFeatureNames) cols.push_back(t.require_column(name, file.string()));
    FeatureTable out;
    for (const auto& row : t.rows) {
        FeatureVector fv;
        for (std::size_t f = 0; f < kFeatureCount; ++f) fv.values[f] = parse_number(row.at(cols[f]));
        out[{row.at(id_col), side_from_string(row.at(side_col))}] = fv;
    }
    return out;
}

std::map<std::string, int> read_folds(const fs::path& file) {
    Table t = read_tsv(file);
    std::size_t s = t.require_column("sentence_id", file.string());
    std::size_t f = t.require_column("fold", file.string());
    std::map<std::string, int> out;
    for (const auto& row : t.rows) out[row.at(s)] = std::stoi(row.at(f));
    return out;
}

std::string Cell::key() const { return std::string(to_string(measure)) + "\t" + to_string(level) + "\t" + scope; }

std::string Cell::file_stem() const {
    std::string s = scope;
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return std::string(to_string(measure)) + "_" + to_string(level) + "_" + s;
}

std::vector<Cell> cells(const RunConfig& config) {
    std::vector<Cell> out;
    for (auto m : config.measures)
        for (auto l : config.levels) {
            if (config.scope_all) out.push_back({m, l, "all"});
            for (const auto& lp : config.language_pairs) out.push_back({m, l, lp});
        }
    return out;
}

namespace {

Feature surprisal_of(Measure m) { return measure_side(m) == Side::source ? Feature::s_lm : Feature::s_mt; }

bool is_attention(Feature f) { return f != Feature::s_lm && f != Feature::s_mt; }

}  // namespace

std::vector<ModelDef> models_for(const RunConfig& config, Measure measure) {
    std::vector<ModelDef> out;
    out.push_back({baseline_model_name(), config.baseline});
    auto add = [&](std::string name, std::vector<Feature> preds) {
        for (const auto& m : out)
            if (m.name == name) return;
        out.push_back({std::move(name), std::move(preds)});
    };
    for (auto f : config.features_for(measure)) {
        auto preds = config.baseline;
        preds.push_back(f);
        add(feature_model_name(f), preds);
    }
    if (config.supplementary) {
        Feature s = surprisal_of(measure);
        for (auto f : config.features_for(measure)) {
            if (!is_attention(f)) continue;
            auto with_s = config.baseline;
            with_s.push_back(s);
            add(feature_model_name(s), with_s);
            with_s.push_back(f);
            add(supplementary_model_name(s, f), with_s);
        }
    }
    return out;
}

std::vector<Comparison> comparisons_for(const RunConfig& config, Measure measure) {
    std::vector<Comparison> out;
    for (auto f : config.features_for(measure))
        out.push_back({std::string(feature_name(f)), feature_model_name(f), baseline_model_name(), "baseline"});
    if (config.supplementary) {
        Feature s = surprisal_of(measure);
        for (auto f : config.features_for(measure)) {
            if (!is_attention(f)) continue;
            std::string name(feature_name(f));
            out.push_back({name, supplementary_model_name(s, f), baseline_model_name(), "supplementary_vs_baseline"});
            out.push_back({name, supplementary_model_name(s, f), feature_model_name(s), "supplementary_vs_surprisal"});
        }
    }
    return out;
}

const SegmentRef* unit_on(const BehavioralObservation& obs, Side side) {
    if (obs.unit.side == side) return &obs.unit;
    if (obs.aligned && obs.aligned->side == side) return &*obs.aligned;
    return nullptr;
}

void require_dir(const fs::path& dir, const char* stage) {
    if (!fs::is_directory(dir))
        throw ConfigError(std::string("missing outputs of stage '") + stage + "' in " + dir.parent_path().string());
}

}  // namespace tdiff::layout

namespace tdiff {

std::string baseline_model_name() { return "baseline"; }
std::string feature_model_name(Feature f) { return "baseline+" + std::string(feature_name(f)); }
std::string supplementary_model_name(Feature surprisal, Feature attention) {
    return "baseline+" + std::string(feature_name(surprisal)) + "+" + std::string(feature_name(attention));
}

}  // namespace tdiff
