#include <sstream>

#include "json.hpp"

#include "run_layout.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Rows of a result table as header -> value maps; nullopt when absent.
struct Rows {
    std::vector<std::map<std::string, std::string>> rows;
    bool present = false;
};

Rows load(const fs::path& file) {
    Rows out;
    if (!fs::exists(file)) return out;
    Table t = read_tsv(file);
    out.present = true;
    for (const auto& r : t.rows) {
        std::map<std::string, std::string> m;
        for (std::size_t c = 0; c < t.header.size() && c < r.size(); ++c) m[t.header[c]] = r[c];
        out.rows.push_back(std::move(m));
    }
    return out;
}

std::optional<json> load_json(const fs::path& file) {
    if (!fs::exists(file)) return std::nullopt;
    try {
        return json::parse(read_file(file));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::string fixed(const std::string& cell, int decimals = 4) {
    auto v = parse_number(cell);
    return v ? format_fixed(*v, decimals) : "NA";
}

std::string starred(const std::string& cell, const std::string& stars) {
    return stars.empty() ? fixed(cell) : fixed(cell) + " " + stars;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
        out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

void md_table(std::ostringstream& md, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
    md << "|";
    for (const auto& h : header) md << " " << h << " |";
    md << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& r : rows) {
        md << "|";
        for (const auto& c : r) md << " " << c << " |";
        md << "\n";
    }
    md << "\n";
}

void missing(std::ostringstream& md, const char* stage) {
    md << "_Missing: stage `" << stage << "` has no output in this run._\n\n";
}

}  // namespace

void render_report(const fs::path& run) {
    json manifest;
    try {
        manifest = json::parse(read_file(run / "manifest.json"));
        if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("stages"))
            throw FormatError("incomplete");
    } catch (const std::exception& e) {
        throw FormatError("run manifest in " + run.string() + " is corrupt or missing: " + e.what());
    }

    std::ostringstream md;
    md << "# Translation difficulty run\n\n";
    md << "- config hash: `" << manifest.value("config_hash", "") << "`\n";
    md << "- seed: " << manifest["config"]["seed"].dump() << "\n";
    md << "- folds: " << manifest["config"]["folds"]["k"].dump() << "\n";
    md << "- stages:";
    for (const auto& [stage, status] : manifest["stages"].items())
        if (stage != "report") md << " " << stage << "=" << status.get<std::string>();
    md << "\n";
    if (auto failure = load_json(run / "failure.json"))
        md << "- failure: stage `" << failure->value("stage", "?") << "`: " << failure->value("error", "") << "\n";
    md << "\n";

    md << "## Data\n\n";
    if (auto s = load_json(run / "ingest" / "summary.json")) {
        for (const auto& [k, v] : s->items()) md << "- " << k << ": " << v.dump() << "\n";
        md << "\n";
        auto counts = load(run / "ingest" / "counts.tsv");
        std::vector<std::vector<std::string>> rows;
        for (auto& r : counts.rows) rows.push_back({r["language_pair"], r["level"], r["measure"], r["n"]});
        md_table(md, {"language pair", "level", "measure", "samples"}, rows);
    } else {
        missing(md, "ingest");
    }

    md << "## Feature extraction\n\n";
    if (auto s = load_json(run / "extract" / "summary.json")) {
        for (const auto& [k, v] : s->items()) md << "- " << k << ": " << v.dump() << "\n";
        md << "\n";
    } else {
        missing(md, "extract");
    }

    md << "## Model fits\n\n";
    auto cells = load(run / "fit" / "cells.tsv");
    if (cells.present) {
        std::vector<std::vector<std::string>> failed;
        for (auto& r : cells.rows)
            if (r["status"] != "ok") failed.push_back({r["measure"], r["level"], r["scope"], r["model"], "missing: " + r["message"]});
        md << "- fitted models: " << cells.rows.size() - failed.size() << " of " << cells.rows.size() << "\n\n";
        if (!failed.empty()) md_table(md, {"measure", "level", "scope", "model", "status"}, failed);
    } else {
        missing(md, "fit");
    }

    md << "## Held-out log-likelihood gains\n\n";
    auto deltas = load(run / "evaluate" / "delta_llh.tsv");
    std::vector<std::vector<std::string>> delta_csv;
    if (!deltas.present) {
        missing(md, "evaluate");
    } else if (deltas.rows.empty()) {
        md << "No predictors configured; only baseline models were fitted.\n\n";
    } else {
        md << "Mean per-sample difference in held-out log-likelihood against the reference model, "
              "with permutation p-values (* p<.05, ** p<.01, *** p<.001).\n\n";
        std::vector<std::vector<std::string>> rows;
        for (auto& r : deltas.rows) {
            bool ok = r["status"] == "ok";
            rows.push_back({r["measure"], r["level"], r["scope"], r["feature"], r["comparison"],
                            ok ? starred(r["mean_delta"], r["stars"]) : "missing",
                            ok ? fixed(r["p_value"]) : "missing", r["n"]});
            delta_csv.push_back({r["measure"], r["level"], r["scope"], r["feature"], r["comparison"], r["mean_delta"],
                                 r["ci_lower"], r["ci_upper"], r["p_value"], r["stars"].empty() ? "0" : "1"});
        }
        md_table(md, {"measure", "level", "scope", "feature", "comparison", "delta llh", "p", "n"}, rows);
    }

    md << "## Coefficients\n\n";
    auto coefs = load(run / "fit" / "coefficients.tsv");
    std::vector<std::vector<std::string>> coef_csv;
    if (!coefs.present) {
        missing(md, "fit");
    } else {
        md << "Fold-averaged coefficients of standardized predictors in single-predictor models.\n\n";
        std::vector<std::vector<std::string>> rows;
        for (auto& r : coefs.rows) {
            coef_csv.push_back({r["measure"], r["level"], r["scope"], r["model"], r["column"], r["mean"], r["ci_lower"],
                                r["ci_upper"]});
            // Only the tested predictor of each single-feature model is shown.
            if (r["model"] != "baseline+" + r["column"]) continue;
            rows.push_back({r["measure"], r["level"], r["scope"], r["column"], fixed(r["mean"]),
                            "[" + fixed(r["ci_lower"]) + ", " + fixed(r["ci_upper"]) + "]"});
        }
        md_table(md, {"measure", "level", "scope", "predictor", "coefficient", "95% CI"}, rows);
    }

    md << "## Collinearity\n\n";
    if (auto s = load_json(run / "evaluate" / "summary.json")) {
        md << "- highest VIF: " << s->value("max_vif", "NA") << "\n";
        auto v = load(run / "evaluate" / "vif.tsv");
        std::vector<std::vector<std::string>> rows;
        for (auto& r : v.rows)
            if (r["flag"] == "high") rows.push_back({r["measure"], r["level"], r["scope"], r["model"], r["column"], r["vif"]});
        md << "- predictors above 2.5: " << rows.size() << "\n\n";
        if (!rows.empty()) md_table(md, {"measure", "level", "scope", "model", "column", "VIF"}, rows);
    } else {
        missing(md, "evaluate");
    }

    md << "## Surprisal correlations\n\n";
    auto corr = load(run / "evaluate" / "correlations.tsv");
    if (corr.present) {
        std::vector<std::vector<std::string>> rows;
        for (auto& r : corr.rows)
            if (r["x"] == "s_lm" && r["y"] == "s_mt")
                rows.push_back({r["level"], r["method"], r["n"], starred(r["coefficient"], r["stars"]), fixed(r["p_value"])});
        if (rows.empty()) md << "No surprisal pairs available.\n\n";
        else md_table(md, {"level", "method", "n", "coefficient", "p"}, rows);
    } else {
        missing(md, "evaluate");
    }

    md << "## Part of speech\n\n";
    auto pos = load(run / "evaluate" / "pos_summary.tsv");
    std::vector<std::vector<std::string>> pos_csv;
    if (pos.present) {
        std::vector<std::vector<std::string>> rows;
        for (auto& r : pos.rows) {
            pos_csv.push_back({r["view"], r["tag"], r["n"], r["variable"], r["mean"], r["ci_lower"], r["ci_upper"], r["flag"]});
            if (r["variable"] != "difficulty") continue;
            rows.push_back({r["view"], r["tag"], r["n"], fixed(r["mean"]),
                            "[" + fixed(r["ci_lower"]) + ", " + fixed(r["ci_upper"]) + "]", r["flag"]});
        }
        if (rows.empty()) md << "No tagged observations.\n\n";
        else md_table(md, {"view", "tag", "n", "difficulty", "95% CI", "note"}, rows);
    } else {
        missing(md, "evaluate");
    }

    fs::path dir = layout::report_dir(run);
    fs::create_directories(dir);
    write_file(dir / "summary.md", md.str());
    write_file(dir / "delta_llh_bars.csv",
               csv({"measure", "level", "scope", "feature", "comparison", "mean_delta", "ci_lower", "ci_upper", "p_value",
                    "significant"},
                   delta_csv));
    write_file(dir / "coefficient_bars.csv",
               csv({"measure", "level", "scope", "model", "column", "mean", "ci_lower", "ci_upper"}, coef_csv));
    write_file(dir / "pos_panels.csv",
               csv({"view", "tag", "n", "variable", "mean", "ci_lower", "ci_upper", "flag"}, pos_csv));
}

}  // namespace tdiff
