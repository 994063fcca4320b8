#include <cmath>
#include <limits>
#include <map>

#include "tdiff/errors.hpp"
#include "tdiff/evaluation.hpp"

namespace tdiff {

CvResult cross_validate(const DesignMatrix& design, const std::vector<int>& fold_of_row,
                        const std::vector<std::string>& sentence_of_row, int folds, const ModelSpec& spec) {
    const auto n = static_cast<std::size_t>(design.rows());
    if (fold_of_row.size() != n || sentence_of_row.size() != n)
        throw ContractError("fold and sentence labels must cover every row");
    std::map<std::string, int> sentence_fold;
    for (std::size_t i = 0; i < n; ++i) {
        if (fold_of_row[i] < 0 || fold_of_row[i] >= folds)
            throw ContractError("row " + std::to_string(i) + " has fold " + std::to_string(fold_of_row[i]));
        auto [it, inserted] = sentence_fold.emplace(sentence_of_row[i], fold_of_row[i]);
        if (!inserted && it->second != fold_of_row[i])
            throw ContractError("train/test sentence overlap: sentence '" + sentence_of_row[i] +
                                "' appears in folds " + std::to_string(it->second) + " and " +
                                std::to_string(fold_of_row[i]));
    }

    CvResult out;
    out.llh.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i)
            (fold_of_row[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        if (test.empty()) continue;
        if (train.empty()) throw FoldError("fold " + std::to_string(f) + " leaves no training rows");

        auto scaled = standardize(select_rows(design, train), select_rows(design, test));
        FitResult fit = spec.kind == ModelKind::ols ? fit_ols(scaled.train) : fit_mixed(scaled.train, spec.mixed);
        auto llh = heldout_loglik(fit, scaled.applied, spec.heldout);
        for (std::size_t t = 0; t < test.size(); ++t) out.llh[static_cast<std::size_t>(test[t])] = llh[t];
        out.fits.push_back(std::move(fit));
        out.fitted_folds.push_back(f);
    }
    return out;
}

DeltaLLH delta_llh(const std::vector<double>& model_a, const std::vector<double>& model_b,
                   const std::vector<int>& fold_of_row, int folds) {
    if (model_a.size() != model_b.size())
        throw ContractError("paired log-likelihood vectors differ in length (" + std::to_string(model_a.size()) +
                            " vs " + std::to_string(model_b.size()) + ")");
    if (!fold_of_row.empty() && fold_of_row.size() != model_a.size())
        throw ContractError("fold labels do not match the log-likelihood vectors");
    DeltaLLH d;
    d.deltas.resize(model_a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < model_a.size(); ++i) {
        d.deltas[i] = model_a[i] - model_b[i];
        total += d.deltas[i];
    }
    d.mean = d.deltas.empty() ? 0.0 : total / static_cast<double>(d.deltas.size());
    if (folds > 0 && !fold_of_row.empty()) {
        std::vector<double> sum(static_cast<std::size_t>(folds), 0.0);
        std::vector<std::size_t> count(static_cast<std::size_t>(folds), 0);
        for (std::size_t i = 0; i < d.deltas.size(); ++i) {
            sum[static_cast<std::size_t>(fold_of_row[i])] += d.deltas[i];
            ++count[static_cast<std::size_t>(fold_of_row[i])];
        }
        for (std::size_t f = 0; f < sum.size(); ++f)
            d.fold_means.push_back(count[f] ? sum[f] / static_cast<double>(count[f])
                                            : std::numeric_limits<double>::quiet_NaN());
    }
    return d;
}

}  // namespace tdiff
