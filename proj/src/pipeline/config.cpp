#include <algorithm>
#include <cstdio>
#include <set>

#include "tdiff/errors.hpp"
#include "tdiff/pipeline.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const char* model_kind_name(ModelKind k) { return k == ModelKind::ols ? "ols" : "mixed"; }

ModelKind model_kind_from(const std::string& s) {
    if (s == "ols") return ModelKind::ols;
    if (s == "mixed") return ModelKind::mixed;
    throw ConfigError("model must be 'ols' or 'mixed', got '" + s + "'");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::string& column_field(ColumnSchema& c, const std::string& key) {
    static const std::map<std::string, std::string ColumnSchema::*> fields{
        {"study", &ColumnSchema::study},
        {"participant", &ColumnSchema::participant},
        {"pair", &ColumnSchema::pair},
        {"side", &ColumnSchema::side},
        {"unit", &ColumnSchema::unit},
        {"aligned", &ColumnSchema::aligned},
        {"source_sentences", &ColumnSchema::source_sentences},
        {"target_sentences", &ColumnSchema::target_sentences},
        {"trt_s", &ColumnSchema::trt_s},
        {"trt_t", &ColumnSchema::trt_t},
        {"dur", &ColumnSchema::dur},
        {"pos", &ColumnSchema::pos},
        {"sentence_pair", &ColumnSchema::sentence_pair},
        {"sentence_id", &ColumnSchema::sentence_id},
        {"sentence_language_pair", &ColumnSchema::sentence_language_pair},
        {"sentence_source", &ColumnSchema::sentence_source},
        {"sentence_target", &ColumnSchema::sentence_target},
        {"sentence_pos", &ColumnSchema::sentence_pos},
    };
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown column key '" + key + "'");
    return c.*(it->second);
}

const std::vector<std::string> kColumnKeys{
    "study", "participant", "pair", "side", "unit", "aligned", "source_sentences", "target_sentences", "trt_s",
    "trt_t", "dur", "pos", "sentence_pair", "sentence_id", "sentence_language_pair", "sentence_source",
    "sentence_target", "sentence_pos"};

fs::path resolve(const RunConfig& c, const fs::path& p) { return p.is_absolute() ? p : c.base_dir / p; }

}  // namespace

std::vector<Feature> default_features(Measure measure) {
    std::vector<Feature> out;
    if (measure_side(measure) == Side::source) {
        out.push_back(Feature::s_lm);
        out.insert(out.end(), kSourceAttentionFeatures.begin(), kSourceAttentionFeatures.end());
    } else {
        out.push_back(Feature::s_lm);
        out.push_back(Feature::s_mt);
        out.insert(out.end(), kTargetAttentionFeatures.begin(), kTargetAttentionFeatures.end());
    }
    return out;
}

std::uint64_t RunConfig::master_seed() const {
    if (!seed) throw ConfigError("config has no seed");
    return *seed;
}

const std::vector<Feature>& RunConfig::features_for(Measure m) const {
    static const std::map<Measure, std::vector<Feature>> defaults{
        {Measure::TrtS, default_features(Measure::TrtS)},
        {Measure::TrtT, default_features(Measure::TrtT)},
        {Measure::Dur, default_features(Measure::Dur)}};
    auto it = features.find(m);
    return it != features.end() ? it->second : defaults.at(m);
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be an object");
    reject_unknown(j,
                   {"seed", "inputs", "output", "folds", "levels", "measures", "features", "baseline",
                    "supplementary", "scopes", "model", "test", "bootstrap"},
                   "config");
    RunConfig c;
    c.base_dir = base_dir;
    if (j.contains("seed") && !j.at("seed").is_null()) {
        const auto& seed = j.at("seed");
        if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
            throw ConfigError("seed must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }

    if (!j.contains("inputs")) throw ConfigError("config has no inputs");
    const json& in = j.at("inputs");
    reject_unknown(in, {"sentences", "units", "columns", "dumps", "frequency"}, "inputs");
    c.tables.sentences = get_or<std::string>(in, "sentences", "");
    c.dumps = get_or<std::string>(in, "dumps", "");
    c.frequency = get_or<std::string>(in, "frequency", "");
    if (in.contains("units")) {
        for (const auto& u : in.at("units")) {
            reject_unknown(u, {"file", "level", "side", "study"}, "inputs.units");
            UnitTableSpec spec;
            spec.file = get_or<std::string>(u, "file", "");
            try {
                spec.level = level_from_string(get_or<std::string>(u, "level", "word"));
                if (u.contains("side")) spec.side = side_from_string(u.at("side").get<std::string>());
            } catch (const Error& e) {
                throw ConfigError(std::string("inputs.units: ") + e.what());
            }
            spec.study = get_or<std::string>(u, "study", "");
            c.tables.units.push_back(std::move(spec));
        }
    }
    if (in.contains("columns"))
        for (const auto& [key, value] : in.at("columns").items())
            column_field(c.tables.columns, key) = value.get<std::string>();

    c.output = get_or<std::string>(j, "output", "run");

    if (j.contains("folds")) {
        const json& f = j.at("folds");
        reject_unknown(f, {"k", "stratify"}, "folds");
        c.folds = get_or<int>(f, "k", c.folds);
        c.stratify_folds = get_or<bool>(f, "stratify", c.stratify_folds);
    }
    try {
        if (j.contains("levels")) {
            c.levels.clear();
            for (const auto& l : j.at("levels")) c.levels.push_back(level_from_string(l.get<std::string>()));
        }
        if (j.contains("measures")) {
            c.measures.clear();
            for (const auto& m : j.at("measures")) c.measures.push_back(measure_from_string(m.get<std::string>()));
        }
        if (j.contains("features")) {
            for (const auto& [key, list] : j.at("features").items()) {
                std::vector<Feature> fs;
                for (const auto& f : list) fs.push_back(feature_from_name(f.get<std::string>()));
                c.features[measure_from_string(key)] = std::move(fs);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("baseline")) {
        c.baseline.clear();
        for (const auto& f : j.at("baseline")) c.baseline.push_back(feature_from_name(f.get<std::string>()));
    }
    c.supplementary = get_or<bool>(j, "supplementary", c.supplementary);

    if (j.contains("scopes")) {
        const json& s = j.at("scopes");
        reject_unknown(s, {"all", "language_pairs"}, "scopes");
        c.scope_all = get_or<bool>(s, "all", c.scope_all);
        c.language_pairs = get_or<std::vector<std::string>>(s, "language_pairs", {});
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, {"all", "language_pair", "heldout", "tolerance", "max_iterations", "theta_upper"}, "model");
        c.all_model = model_kind_from(get_or<std::string>(m, "all", "mixed"));
        c.pair_model = model_kind_from(get_or<std::string>(m, "language_pair", "ols"));
        std::string heldout = get_or<std::string>(m, "heldout", "conditional");
        if (heldout == "conditional") c.model.heldout = HeldoutMode::conditional;
        else if (heldout == "marginal") c.model.heldout = HeldoutMode::marginal;
        else throw ConfigError("model.heldout must be 'conditional' or 'marginal'");
        c.model.mixed.tolerance = get_or<double>(m, "tolerance", c.model.mixed.tolerance);
        c.model.mixed.max_iterations = get_or<int>(m, "max_iterations", c.model.mixed.max_iterations);
        c.model.mixed.theta_upper = get_or<double>(m, "theta_upper", c.model.mixed.theta_upper);
    }
    if (j.contains("test")) {
        const json& t = j.at("test");
        reject_unknown(t, {"n_perm", "sidedness", "aggregate"}, "test");
        c.n_perm = get_or<int>(t, "n_perm", c.n_perm);
        std::string side = get_or<std::string>(t, "sidedness", "greater");
        if (side == "greater") c.sidedness = Sidedness::greater;
        else if (side == "two_sided") c.sidedness = Sidedness::two_sided;
        else throw ConfigError("test.sidedness must be 'greater' or 'two_sided'");
        std::string agg = get_or<std::string>(t, "aggregate", "samples");
        if (agg != "samples" && agg != "folds") throw ConfigError("test.aggregate must be 'samples' or 'folds'");
        c.fold_level_test = agg == "folds";
    }
    c.n_boot = get_or<int>(j, "bootstrap", c.n_boot);
    return c;
}

RunConfig load_config(const fs::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config " + file.string() + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(file).parent_path());
}

json config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    json in;
    in["sentences"] = c.tables.sentences.generic_string();
    in["units"] = json::array();
    for (const auto& u : c.tables.units) {
        json uj;
        uj["file"] = u.file.generic_string();
        uj["level"] = to_string(u.level);
        if (u.side) uj["side"] = to_string(*u.side);
        uj["study"] = u.study;
        in["units"].push_back(uj);
    }
    ColumnSchema cols = c.tables.columns;
    json cj;
    for (const auto& key : kColumnKeys) cj[key] = column_field(cols, key);
    in["columns"] = cj;
    in["dumps"] = c.dumps.generic_string();
    in["frequency"] = c.frequency.generic_string();
    j["inputs"] = in;
    j["output"] = c.output.generic_string();
    j["folds"] = {{"k", c.folds}, {"stratify", c.stratify_folds}};
    j["levels"] = json::array();
    for (auto l : c.levels) j["levels"].push_back(to_string(l));
    j["measures"] = json::array();
    for (auto m : c.measures) j["measures"].push_back(to_string(m));
    json fj = json::object();
    for (auto m : kMeasures) {
        json list = json::array();
        for (auto f : c.features_for(m)) list.push_back(std::string(feature_name(f)));
        fj[to_string(m)] = list;
    }
    j["features"] = fj;
    j["baseline"] = json::array();
    for (auto f : c.baseline) j["baseline"].push_back(std::string(feature_name(f)));
    j["supplementary"] = c.supplementary;
    j["scopes"] = {{"all", c.scope_all}, {"language_pairs", c.language_pairs}};
    j["model"] = {{"all", model_kind_name(c.all_model)},
                  {"language_pair", model_kind_name(c.pair_model)},
                  {"heldout", c.model.heldout == HeldoutMode::conditional ? "conditional" : "marginal"},
                  {"tolerance", c.model.mixed.tolerance},
                  {"max_iterations", c.model.mixed.max_iterations},
                  {"theta_upper", c.model.mixed.theta_upper}};
    j["test"] = {{"n_perm", c.n_perm},
                 {"sidedness", c.sidedness == Sidedness::greater ? "greater" : "two_sided"},
                 {"aggregate", c.fold_level_test ? "folds" : "samples"}};
    j["bootstrap"] = c.n_boot;
    return j;
}

std::string config_hash(const RunConfig& c) {
    std::string text = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void validate_config(const RunConfig& c) {
    c.master_seed();
    if (c.folds < 2) throw ConfigError("folds.k must be at least 2");
    if (c.n_perm < 1) throw ConfigError("test.n_perm must be positive");
    if (c.n_boot < 1) throw ConfigError("bootstrap must be positive");
    if (c.levels.empty() || c.measures.empty()) throw ConfigError("levels and measures must not be empty");
    if (!c.scope_all && c.language_pairs.empty()) throw ConfigError("no analysis scope selected");

    auto require_file = [&](const fs::path& p, const char* what) {
        if (p.empty()) throw ConfigError(std::string("config has no ") + what);
        if (!fs::is_regular_file(resolve(c, p)))
            throw ConfigError(std::string(what) + " not found: " + resolve(c, p).string());
    };
    require_file(c.tables.sentences, "sentence table");
    if (c.tables.units.empty()) throw ConfigError("config lists no unit tables");
    for (const auto& u : c.tables.units) require_file(u.file, "unit table");
    require_file(c.frequency, "frequency file");
    if (c.dumps.empty() || !fs::is_directory(resolve(c, c.dumps)))
        throw ConfigError("dump directory not found: " + resolve(c, c.dumps).string());
    require_file(c.dumps / "manifest.json", "dump manifest");

    std::set<Feature> controls(kControlFeatures.begin(), kControlFeatures.end());
    for (auto f : c.baseline)
        if (!controls.count(f)) throw ConfigError("baseline may only hold control features, got " + std::string(feature_name(f)));
    for (auto m : c.measures) {
        auto allowed = default_features(m);
        for (auto f : c.features_for(m))
            if (std::find(allowed.begin(), allowed.end(), f) == allowed.end())
                throw ConfigError(std::string("feature ") + std::string(feature_name(f)) + " is not defined for " +
                                  to_string(m));
    }
}



}  // namespace tdiff
