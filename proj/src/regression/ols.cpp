#include <cmath>
#include <numbers>

#include "tdiff/errors.hpp"
#include "tdiff/regression.hpp"

namespace tdiff {

const RandomFactor* FitResult::factor(const std::string& name) const {
    for (const auto& f : factors)
        if (f.name == name) return &f;
    return nullptr;
}

FitResult fit_ols(const DesignMatrix& design) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (n <= p)
        throw NumericalError("least squares needs more rows (" + std::to_string(n) + ") than columns (" +
                             std::to_string(p) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::vector<std::string> dependent;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k)
            dependent.push_back(design.columns[static_cast<std::size_t>(perm(k))]);
        std::string list;
        for (const auto& c : dependent) list += (list.empty() ? "" : ", ") + c;
        throw NumericalError("design matrix is rank deficient; dependent column(s): " + list, dependent);
    }
    FitResult fit;
    fit.kind = ModelKind::ols;
    fit.columns = design.columns;
    fit.n = static_cast<std::size_t>(n);
    fit.beta = qr.solve(design.y);
    const Eigen::VectorXd resid = design.y - design.x * fit.beta;
    const double rss = resid.squaredNorm();
    fit.sigma2 = rss / static_cast<double>(n - p);

    // (X'X)^-1 = P R^-1 R^-T P'
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
    const auto& perm = qr.colsPermutation();
    const Eigen::MatrixXd cov = perm * cov_perm * perm.transpose();
    fit.se = (fit.sigma2 * cov.diagonal().array()).sqrt();
    fit.loglik = gaussian_loglik(design, fit.beta, rss / static_cast<double>(n));
    return fit;
}

double gaussian_loglik(const DesignMatrix& design, const Eigen::VectorXd& beta, double sigma2) {
    const Eigen::VectorXd resid = design.y - design.x * beta;
    const double n = static_cast<double>(design.rows());
    return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * resid.squaredNorm() / sigma2;
}

std::vector<double> heldout_loglik(const FitResult& fit, const DesignMatrix& heldout, HeldoutMode mode) {
    if (heldout.columns != fit.columns)
        throw ContractError("held-out design columns differ from the fitted model");
    const Eigen::VectorXd mean_fixed = heldout.x * fit.beta;
    std::vector<double> out(static_cast<std::size_t>(heldout.rows()));
    for (Eigen::Index i = 0; i < heldout.rows(); ++i) {
        double mean = mean_fixed(i);
        double var = fit.sigma2;
        for (const auto& f : fit.factors) {
            const auto& labels = f.name == "language_pair" ? heldout.language_pair : heldout.participant;
            if (labels.empty()) throw ContractError("held-out rows lack " + f.name + " labels");
            auto it = f.intercepts.find(labels[static_cast<std::size_t>(i)]);
            if (mode == HeldoutMode::conditional && it != f.intercepts.end())
                mean += it->second;
            else
                var += f.variance;
        }
        const double r = heldout.y(i) - mean;
        out[static_cast<std::size_t>(i)] = -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
    }
    return out;
}

}  // namespace tdiff
