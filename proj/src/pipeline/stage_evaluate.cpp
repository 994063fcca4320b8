#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "run_layout.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/parallel.hpp"
#include "tdiff/rng.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

struct HeldoutCell {
    std::vector<int> fold;
    std::map<std::string, std::vector<std::optional<double>>> llh;  // per model
};

HeldoutCell read_heldout(const fs::path& file) {
    Table t = read_tsv(file);
    HeldoutCell out;
    std::size_t fold_col = t.require_column("fold", file.string());
    for (const auto& row : t.rows) out.fold.push_back(std::stoi(row.at(fold_col)));
    for (std::size_t c = 2; c < t.header.size(); ++c) {
        auto& v = out.llh[t.header[c]];
        for (const auto& row : t.rows) v.push_back(parse_number(row.at(c)));
    }
    return out;
}

std::optional<std::vector<double>> complete(const std::vector<std::optional<double>>& v) {
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x) return std::nullopt;
        out.push_back(*x);
    }
    return out;
}

}  // namespace

void stage_evaluate(const RunConfig& config, const fs::path& run, int jobs) {
    layout::require_dir(layout::fit_dir(run), "fit");
    const std::uint64_t seed = config.master_seed();
    const fs::path fit = layout::fit_dir(run);
    fs::path dir = layout::evaluate_dir(run);
    fs::create_directories(dir);

    // Delta llh with permutation tests.
    struct Task {
        layout::Cell cell;
        layout::Comparison cmp;
    };
    std::vector<Task> tasks;
    for (const auto& cell : layout::cells(config))
        for (const auto& cmp : layout::comparisons_for(config, cell.measure)) tasks.push_back({cell, cmp});

    std::map<std::string, HeldoutCell> heldout;
    for (const auto& cell : layout::cells(config)) {
        fs::path file = fit / "heldout" / (cell.file_stem() + ".tsv");
        if (fs::exists(file)) heldout[cell.key()] = read_heldout(file);
    }

    std::vector<std::vector<std::string>> delta_rows(tasks.size());
    std::vector<std::vector<std::vector<std::string>>> fold_rows(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        const auto& [cell, cmp] = tasks[t];
        std::vector<std::string> row = split(cell.key(), '\t');
        row.insert(row.end(), {cmp.feature, cmp.kind, cmp.model, cmp.reference});
        auto missing = [&](const std::string& why) {
            row.insert(row.end(), {"0", "NA", "NA", "NA", "NA", "", "missing", why});
            delta_rows[t] = row;
        };
        auto hit = heldout.find(cell.key());
        if (hit == heldout.end()) return missing("no held-out table");
        auto a = hit->second.llh.count(cmp.model) ? complete(hit->second.llh.at(cmp.model)) : std::nullopt;
        auto b = hit->second.llh.count(cmp.reference) ? complete(hit->second.llh.at(cmp.reference)) : std::nullopt;
        if (!a || !b) return missing("model fit failed");
        if (a->empty()) return missing("no rows");

        DeltaLLH d = delta_llh(*a, *b, hit->second.fold, config.folds);
        std::vector<double> tested = d.deltas;
        if (config.fold_level_test) {
            tested.clear();
            for (double m : d.fold_means)
                if (!std::isnan(m)) tested.push_back(m);
        }
        std::string stream = "permutation:" + cell.key() + ":" + cmp.model + ":" + cmp.reference;
        d.p_value = paired_permutation_test(tested, config.n_perm, substream_seed(seed, stream), config.sidedness);

        double var = 0.0;
        for (double x : d.deltas) var += (x - d.mean) * (x - d.mean);
        double n = static_cast<double>(d.deltas.size());
        double half = n > 1 ? 1.96 * std::sqrt(var / (n - 1) / n) : 0.0;
        row.insert(row.end(), {std::to_string(d.deltas.size()), format_number(d.mean), format_number(d.mean - half),
                               format_number(d.mean + half), format_number(*d.p_value), stars(*d.p_value), "ok", ""});
        delta_rows[t] = row;
        for (std::size_t f = 0; f < d.fold_means.size(); ++f) {
            std::vector<std::string> fr = split(cell.key(), '\t');
            fr.insert(fr.end(), {cmp.model, cmp.reference, std::to_string(f), format_number(d.fold_means[f])});
            fold_rows[t].push_back(std::move(fr));
        }
    });
    std::vector<std::vector<std::string>> all_folds;
    for (auto& f : fold_rows) all_folds.insert(all_folds.end(), f.begin(), f.end());
    write_file(dir / "delta_llh.tsv",
               render_tsv({"measure", "level", "scope", "feature", "comparison", "model", "reference", "n",
                           "mean_delta", "ci_lower", "ci_upper", "p_value", "stars", "status", "message"},
                          delta_rows));
    write_file(dir / "delta_llh_folds.tsv",
               render_tsv({"measure", "level", "scope", "model", "reference", "fold", "mean_delta"}, all_folds));

    // Collinearity, correlations and part-of-speech panels use the extracted
    // feature table directly.
    auto observations = parse_observations(read_file(layout::ingest_dir(run) / "observations.jsonl"));
    auto features = layout::read_features(layout::extract_dir(run) / "features.tsv");
    json summary;

    std::vector<std::vector<std::string>> vif_rows;
    double max_vif = 0.0;
    for (const auto& cell : layout::cells(config)) {
        const Side side = measure_side(cell.measure);
        for (const auto& model : layout::models_for(config, cell.measure)) {
            if (model.predictors.size() < 2) continue;
            std::vector<std::vector<double>> cols(model.predictors.size());
            std::vector<double> y;
            for (const auto& o : observations) {
                if (o.level != cell.level || !o.duration(cell.measure)) continue;
                if (cell.scope != "all" && o.language_pair != cell.scope) continue;
                auto it = features.find({o.id, side});
                if (it == features.end()) continue;
                bool ok = true;
                for (auto f : model.predictors) ok = ok && it->second[f].has_value();
                if (!ok) continue;
                for (std::size_t j = 0; j < model.predictors.size(); ++j)
                    cols[j].push_back(*it->second[model.predictors[j]]);
                y.push_back(*o.duration(cell.measure));
            }
            if (y.size() <= model.predictors.size() + 1) continue;
            std::vector<std::string> names;
            for (auto f : model.predictors) names.emplace_back(feature_name(f));
            for (const auto& e : vif(make_design(names, cols, y))) {
                std::vector<std::string> row = split(cell.key(), '\t');
                row.insert(row.end(), {model.name, e.column, format_number(e.value), e.above_threshold ? "high" : ""});
                vif_rows.push_back(std::move(row));
                max_vif = std::max(max_vif, e.value);
            }
        }
    }
    write_file(dir / "vif.tsv", render_tsv({"measure", "level", "scope", "model", "column", "vif", "flag"}, vif_rows));
    summary["max_vif"] = vif_rows.empty() ? "NA" : format_number(max_vif);

    std::vector<std::vector<std::string>> corr_rows;
    for (auto level : config.levels) {
        for (Side side : {Side::source, Side::target}) {
            std::vector<Feature> fs_list = default_features(side == Side::source ? Measure::TrtS : Measure::Dur);
            std::map<Feature, std::vector<double>> values;
            std::vector<const FeatureVector*> rows;
            for (const auto& o : observations) {
                if (o.level != level) continue;
                auto it = features.find({o.id, side});
                if (it != features.end()) rows.push_back(&it->second);
            }
            for (std::size_t a = 0; a < fs_list.size(); ++a) {
                for (std::size_t b = a + 1; b < fs_list.size(); ++b) {
                    std::vector<double> x, y;
                    for (const auto* fv : rows)
                        if ((*fv)[fs_list[a]] && (*fv)[fs_list[b]]) {
                            x.push_back(*(*fv)[fs_list[a]]);
                            y.push_back(*(*fv)[fs_list[b]]);
                        }
                    for (auto method : {CorrelationMethod::pearson, CorrelationMethod::spearman}) {
                        std::vector<std::string> row{to_string(level), to_string(side),
                                                     std::string(feature_name(fs_list[a])),
                                                     std::string(feature_name(fs_list[b])),
                                                     method == CorrelationMethod::pearson ? "pearson" : "spearman"};
                        try {
                            auto c = correlate(x, y, method);
                            row.insert(row.end(), {std::to_string(c.n), format_number(c.coefficient),
                                                   format_number(c.p_value), stars(c.p_value)});
                        } catch (const DomainError&) {
                            row.insert(row.end(), {std::to_string(x.size()), "NA", "NA", ""});
                        }
                        corr_rows.push_back(std::move(row));
                    }
                }
            }
        }
    }
    write_file(dir / "correlations.tsv",
               render_tsv({"level", "side", "x", "y", "method", "n", "coefficient", "p_value", "stars"}, corr_rows));

    // Part-of-speech panels: source reading time against source features, and
    // per-word translation duration against target features.
    std::vector<std::vector<std::string>> pos_rows;
    json pos_status = json::object();
    for (Side side : {Side::source, Side::target}) {
        Measure m = side == Side::source ? Measure::TrtS : Measure::Dur;
        const auto& preds = config.features_for(m);
        std::vector<PosRow> rows;
        for (const auto& o : observations) {
            if (o.level != UnitLevel::word || !o.pos_tag || !o.duration(m)) continue;
            auto it = features.find({o.id, side});
            if (it == features.end()) continue;
            PosRow r;
            r.tag = *o.pos_tag;
            if (side == Side::source) {
                r.difficulty = *o.trt_s;
            } else {
                const SegmentRef* src = layout::unit_on(o, Side::source);
                if (!src) continue;
                r.difficulty = avg_translation_duration(std::exp(*o.dur), static_cast<int>(src->indices.size()));
            }
            bool ok = true;
            for (auto f : preds) {
                ok = ok && it->second[f].has_value();
                if (ok) r.predictors.push_back(*it->second[f]);
            }
            if (ok) rows.push_back(std::move(r));
        }
        const char* view = side == Side::source ? "source" : "target";
        try {
            auto groups = pos_group_summary(rows, config.n_boot, substream_seed(seed, std::string("pos:") + view));
            for (const auto& g : groups) {
                auto emit = [&](const std::string& var, const MeanCI& ci) {
                    pos_rows.push_back({view, g.tag, std::to_string(g.n), var, format_number(ci.mean),
                                        format_number(ci.lower), format_number(ci.upper), g.degenerate ? "degenerate" : ""});
                };
                emit("difficulty", g.difficulty);
                for (std::size_t k = 0; k < preds.size(); ++k) emit(std::string(feature_name(preds[k])), g.predictors[k]);
            }
            pos_status[view] = "ok";
        } catch (const EmptyReportError& e) {
            pos_status[view] = std::string("empty: ") + e.what();
        }
    }
    write_file(dir / "pos_summary.tsv",
               render_tsv({"view", "tag", "n", "variable", "mean", "ci_lower", "ci_upper", "flag"}, pos_rows));
    summary["pos_summary"] = pos_status;
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace tdiff
