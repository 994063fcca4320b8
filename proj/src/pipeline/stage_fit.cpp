#include <cmath>
#include <set>

#include "json.hpp"

#include "run_layout.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/parallel.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CellRows {
    std::vector<const BehavioralObservation*> obs;
    std::vector<const FeatureVector*> features;
    std::size_t dropped_missing = 0;
};

CellRows gather(const layout::Cell& cell, const std::vector<layout::ModelDef>& models,
                const std::vector<BehavioralObservation>& observations, const layout::FeatureTable& features) {
    std::set<Feature> used;
    for (const auto& m : models) used.insert(m.predictors.begin(), m.predictors.end());
    const Side side = measure_side(cell.measure);
    CellRows out;
    for (const auto& o : observations) {
        if (o.level != cell.level || !o.duration(cell.measure)) continue;
        if (cell.scope != "all" && o.language_pair != cell.scope) continue;
        auto it = features.find({o.id, side});
        bool complete = it != features.end();
        if (complete)
            for (auto f : used)
                if (!it->second[f]) complete = false;
        if (!complete) {
            ++out.dropped_missing;
            continue;
        }
        out.obs.push_back(&o);
        out.features.push_back(&it->second);
    }
    return out;
}

DesignMatrix design_for(const layout::Cell& cell, const layout::ModelDef& model, const CellRows& rows) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    for (auto f : model.predictors) {
        names.emplace_back(feature_name(f));
        std::vector<double> col;
        for (const auto* fv : rows.features) col.push_back(*(*fv)[f]);
        cols.push_back(std::move(col));
    }
    std::vector<double> y;
    std::vector<std::string> lp, part;
    for (const auto* o : rows.obs) {
        y.push_back(*o->duration(cell.measure));
        lp.push_back(o->language_pair);
        part.push_back(o->participant_id);
    }
    return make_design(names, cols, y, std::move(lp), std::move(part));
}

json fit_record(const layout::Cell& cell, const std::string& model, int fold, const FitResult& fit) {
    json j;
    j["measure"] = to_string(cell.measure);
    j["level"] = to_string(cell.level);
    j["scope"] = cell.scope;
    j["model"] = model;
    j["fold"] = fold;
    j["kind"] = fit.kind == ModelKind::ols ? "ols" : "mixed";
    j["n"] = fit.n;
    j["loglik"] = format_number(fit.loglik);
    j["sigma2"] = format_number(fit.sigma2);
    json factors = json::object();
    for (const auto& f : fit.factors) factors[f.name] = format_number(f.variance);
    j["random_variances"] = factors;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["warnings"] = fit.warnings;
    return j;
}

struct ModelOutcome {
    std::optional<CvResult> cv;
    std::string error;
};

}  // namespace

void stage_fit(const RunConfig& config, const fs::path& run, int jobs) {
    layout::require_dir(layout::ingest_dir(run), "ingest");
    layout::require_dir(layout::extract_dir(run), "extract");
    auto observations = parse_observations(read_file(layout::ingest_dir(run) / "observations.jsonl"));
    auto folds = layout::read_folds(layout::ingest_dir(run) / "folds.tsv");
    auto features = layout::read_features(layout::extract_dir(run) / "features.tsv");

    auto cells = layout::cells(config);
    std::vector<std::vector<layout::ModelDef>> cell_models;
    std::vector<CellRows> cell_rows;
    for (const auto& c : cells) {
        cell_models.push_back(layout::models_for(config, c.measure));
        cell_rows.push_back(gather(c, cell_models.back(), observations, features));
    }

    // One task per (cell, model); every task writes its own slot.
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    std::vector<std::vector<ModelOutcome>> outcomes(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        outcomes[c].resize(cell_models[c].size());
        for (std::size_t m = 0; m < cell_models[c].size(); ++m) tasks.emplace_back(c, m);
    }
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        auto [c, m] = tasks[t];
        const auto& cell = cells[c];
        const auto& rows = cell_rows[c];
        ModelOutcome& out = outcomes[c][m];
        if (rows.obs.size() < static_cast<std::size_t>(config.folds)) {
            out.error = "too few rows (" + std::to_string(rows.obs.size()) + ")";
            return;
        }
        ModelSpec spec = config.model;
        spec.kind = cell.scope == "all" ? config.all_model : config.pair_model;
        std::vector<int> fold_of_row;
        std::vector<std::string> sentence_of_row;
        for (const auto* o : rows.obs) {
            auto it = folds.find(o->source_sentence_id);
            if (it == folds.end()) throw FoldError("sentence " + o->source_sentence_id + " has no fold");
            fold_of_row.push_back(it->second);
            sentence_of_row.push_back(o->source_sentence_id);
        }
        try {
            out.cv = cross_validate(design_for(cell, cell_models[c][m], rows), fold_of_row, sentence_of_row,
                                    config.folds, spec);
        } catch (const ContractError&) {
            throw;
        } catch (const Error& e) {
            out.error = e.what();
        }
    });

    fs::path dir = layout::fit_dir(run);
    fs::create_directories(dir / "heldout");
    std::vector<std::vector<std::string>> cell_table, coef_rows;
    std::string fits_jsonl;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const auto& rows = cell_rows[c];
        const auto& models = cell_models[c];

        std::vector<std::string> header{"obs_id", "fold"};
        for (std::size_t m = 0; m < models.size(); ++m) header.push_back(models[m].name);
        std::vector<std::vector<std::string>> llh_rows;
        for (std::size_t r = 0; r < rows.obs.size(); ++r) {
            std::vector<std::string> row{rows.obs[r]->id, std::to_string(folds.at(rows.obs[r]->source_sentence_id))};
            for (std::size_t m = 0; m < models.size(); ++m)
                row.push_back(outcomes[c][m].cv ? format_number(outcomes[c][m].cv->llh[r]) : "NA");
            llh_rows.push_back(std::move(row));
        }
        write_file(dir / "heldout" / (cell.file_stem() + ".tsv"), render_tsv(header, llh_rows));

        for (std::size_t m = 0; m < models.size(); ++m) {
            const auto& out = outcomes[c][m];
            auto parts = split(cell.key(), '\t');
            std::vector<std::string> row = parts;
            row.push_back(models[m].name);
            row.push_back(std::to_string(rows.obs.size()));
            row.push_back(std::to_string(rows.dropped_missing));
            row.push_back(out.cv ? "ok" : "failed");
            row.push_back(out.error);
            row.push_back(cell.file_stem() + ".tsv");
            cell_table.push_back(std::move(row));
            if (!out.cv) continue;

            const auto& fits = out.cv->fits;
            for (std::size_t k = 0; k < fits.size(); ++k)
                fits_jsonl += fit_record(cell, models[m].name, out.cv->fitted_folds[k], fits[k]).dump() + "\n";
            // Coefficients averaged over folds on the standardized scale.
            const auto& columns = fits.front().columns;
            for (std::size_t j = 0; j < columns.size(); ++j) {
                double mean = 0.0, se = 0.0;
                for (const auto& f : fits) {
                    mean += f.beta[static_cast<Eigen::Index>(j)];
                    se += f.se[static_cast<Eigen::Index>(j)];
                }
                mean /= static_cast<double>(fits.size());
                se /= static_cast<double>(fits.size());
                std::vector<std::string> crow = parts;
                crow.insert(crow.end(), {models[m].name, columns[j], format_number(mean), format_number(se),
                                         format_number(mean - 1.96 * se), format_number(mean + 1.96 * se),
                                         std::to_string(fits.size())});
                coef_rows.push_back(std::move(crow));
            }
        }
    }
    write_file(dir / "cells.tsv", render_tsv({"measure", "level", "scope", "model", "n", "dropped_missing", "status",
                                              "message", "heldout_file"},
                                             cell_table));
    write_file(dir / "coefficients.tsv", render_tsv({"measure", "level", "scope", "model", "column", "mean", "mean_se",
                                                     "ci_lower", "ci_upper", "folds"},
                                                    coef_rows));
    write_file(dir / "fits.jsonl", fits_jsonl);
}

}  // namespace tdiff
