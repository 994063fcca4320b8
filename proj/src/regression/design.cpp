#include <cmath>

#include "tdiff/errors.hpp"
#include "tdiff/regression.hpp"

namespace tdiff {

DesignMatrix make_design(const std::vector<std::string>& names,
                         const std::vector<std::vector<double>>& predictors, const std::vector<double>& y,
                         std::vector<std::string> language_pair, std::vector<std::string> participant) {
    if (names.size() != predictors.size()) throw ContractError("predictor names and columns differ in count");
    const auto n = static_cast<Eigen::Index>(y.size());
    DesignMatrix d;
    d.columns.push_back(kInterceptName);
    d.columns.insert(d.columns.end(), names.begin(), names.end());
    d.x.resize(n, static_cast<Eigen::Index>(predictors.size()) + 1);
    d.x.col(0).setOnes();
    for (std::size_t j = 0; j < predictors.size(); ++j) {
        if (static_cast<Eigen::Index>(predictors[j].size()) != n)
            throw ContractError("predictor " + names[j] + " has the wrong number of rows");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = predictors[j][static_cast<std::size_t>(i)];
            if (!std::isfinite(v)) throw ContractError("predictor " + names[j] + " has a missing value");
            d.x(i, static_cast<Eigen::Index>(j) + 1) = v;
        }
    }
    d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    if (!d.y.allFinite()) throw ContractError("response has a missing value");
    if ((!language_pair.empty() && static_cast<Eigen::Index>(language_pair.size()) != n) ||
        (!participant.empty() && static_cast<Eigen::Index>(participant.size()) != n))
        throw ContractError("group labels do not match the number of rows");
    d.language_pair = std::move(language_pair);
    d.participant = std::move(participant);
    return d;
}

DesignMatrix select_rows(const DesignMatrix& design, const std::vector<Eigen::Index>& rows) {
    DesignMatrix out;
    out.columns = design.columns;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), design.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = rows[i];
        out.x.row(static_cast<Eigen::Index>(i)) = design.x.row(r);
        out.y(static_cast<Eigen::Index>(i)) = design.y(r);
        if (!design.language_pair.empty()) out.language_pair.push_back(design.language_pair[static_cast<std::size_t>(r)]);
        if (!design.participant.empty()) out.participant.push_back(design.participant[static_cast<std::size_t>(r)]);
    }
    return out;
}

ScalingRecord fit_scaling(const DesignMatrix& train) {
    if (train.rows() < 2) throw ConfigError("standardization needs at least two training rows");
    ScalingRecord s;
    s.columns = train.columns;
    s.mean = Eigen::VectorXd::Zero(train.cols());
    s.sd = Eigen::VectorXd::Ones(train.cols());
    for (Eigen::Index j = 1; j < train.cols(); ++j) {
        const double mean = train.x.col(j).mean();
        const double var = (train.x.col(j).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * (1.0 + std::abs(mean))))
            throw ConfigError("predictor '" + train.columns[static_cast<std::size_t>(j)] +
                              "' has zero variance in the training rows");
        s.mean(j) = mean;
        s.sd(j) = sd;
    }
    return s;
}

DesignMatrix apply_scaling(const ScalingRecord& scaling, const DesignMatrix& design) {
    if (scaling.columns != design.columns) throw ContractError("scaling record was fitted on other columns");
    DesignMatrix out = design;
    for (Eigen::Index j = 1; j < out.cols(); ++j)
        out.x.col(j) = (out.x.col(j).array() - scaling.mean(j)) / scaling.sd(j);
    return out;
}

StandardizeResult standardize(const DesignMatrix& train, const DesignMatrix& apply_to) {
    StandardizeResult r;
    r.scaling = fit_scaling(train);
    r.train = apply_scaling(r.scaling, train);
    r.applied = apply_scaling(r.scaling, apply_to);
    return r;
}

}  // namespace tdiff
