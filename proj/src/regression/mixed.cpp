#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tdiff/errors.hpp"
#include "tdiff/regression.hpp"

namespace tdiff {

namespace {

struct Factor {
    std::string name;
    std::vector<std::string> levels;  // sorted
    std::vector<int> level_of_row;
};

Factor make_factor(const std::string& name, const std::vector<std::string>& labels) {
    Factor f;
    f.name = name;
    std::map<std::string, int> index;
    for (const auto& l : labels) index.emplace(l, 0);
    int k = 0;
    for (auto& [label, idx] : index) {
        idx = k++;
        f.levels.push_back(label);
    }
    f.level_of_row.reserve(labels.size());
    for (const auto& l : labels) f.level_of_row.push_back(index.at(l));
    return f;
}

// Profiled likelihood of y = X beta + Z_a b_a + Z_b b_b + e with b_k ~ N(0, theta_k^2 sigma^2 I),
// evaluated from sufficient statistics. Factor b (the one with more levels) has a
// diagonal penalized cross-product block and is eliminated first; the remaining
// system has (levels of a + columns) unknowns.
class CrossedInterceptModel {
public:
    struct Solution {
        double deviance = 0.0;
        double r2 = 0.0;
        Eigen::VectorXd beta;
        std::vector<Eigen::VectorXd> u;  // spherical random effects, canonical factor order
        Eigen::MatrixXd beta_cov_unscaled;
    };

    CrossedInterceptModel(const DesignMatrix& d, std::vector<Factor> factors)
        : factors_(std::move(factors)), n_(static_cast<double>(d.rows())), p_(d.cols()) {
        // Center y on its mean when an intercept column is present so the
        // penalized RSS below does not suffer from cancellation.
        if (p_ > 0 && d.columns.front() == kInterceptName) y_shift_ = d.y.mean();
        const Eigen::VectorXd y = d.y.array() - y_shift_;
        xtx_ = d.x.transpose() * d.x;
        xty_ = d.x.transpose() * y;
        yty_ = y.squaredNorm();

        if (factors_.size() == 2) {
            const bool first_larger = factors_[0].levels.size() > factors_[1].levels.size();
            a_ = first_larger ? 1 : 0;
            b_ = first_larger ? 0 : 1;
        } else if (factors_.size() == 1) {
            b_ = 0;
        }
        if (a_ >= 0) accumulate(d, y, factors_[static_cast<std::size_t>(a_)], da_, zax_, zay_);
        if (b_ >= 0) accumulate(d, y, factors_[static_cast<std::size_t>(b_)], db_, zbx_, zby_);
        if (a_ >= 0 && b_ >= 0) {
            const auto& fa = factors_[static_cast<std::size_t>(a_)];
            const auto& fb = factors_[static_cast<std::size_t>(b_)];
            cross_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fa.levels.size()),
                                           static_cast<Eigen::Index>(fb.levels.size()));
            for (std::size_t i = 0; i < fa.level_of_row.size(); ++i)
                cross_(fa.level_of_row[i], fb.level_of_row[i]) += 1.0;
        }
    }

    std::size_t factor_count() const { return factors_.size(); }
    const Factor& factor(std::size_t k) const { return factors_[k]; }
    double y_shift() const { return y_shift_; }

    Solution solve(const std::vector<double>& theta, bool with_cov = false) const {
        const double ta = a_ >= 0 ? theta[static_cast<std::size_t>(a_)] : 0.0;
        const double tb = b_ >= 0 ? theta[static_cast<std::size_t>(b_)] : 0.0;
        const Eigen::Index qa = da_.size();
        const Eigen::Index qb = db_.size();

        Eigen::VectorXd w(qb);  // inverse of the diagonal block tb^2 D_b + I
        double logdet = 0.0;
        for (Eigen::Index j = 0; j < qb; ++j) {
            const double abb = tb * tb * db_(j) + 1.0;
            w(j) = 1.0 / abb;
            logdet += std::log(abb);
        }

        const Eigen::Index m = qa + p_;
        Eigen::MatrixXd sys(m, m);
        Eigen::VectorXd rhs(m);
        const Eigen::MatrixXd wzbx = w.asDiagonal() * zbx_;  // qb x p
        const Eigen::VectorXd wzby = w.cwiseProduct(zby_);
        sys.bottomRightCorner(p_, p_) = xtx_ - tb * tb * zbx_.transpose() * wzbx;
        rhs.tail(p_) = xty_ - tb * tb * zbx_.transpose() * wzby;
        if (qa > 0) {
            Eigen::MatrixXd saa = -(ta * tb) * (ta * tb) * cross_ * w.asDiagonal() * cross_.transpose();
            saa.diagonal().array() += ta * ta * da_.array() + 1.0;
            sys.topLeftCorner(qa, qa) = saa;
            const Eigen::MatrixXd sab = ta * zax_ - ta * tb * tb * cross_ * wzbx;
            sys.topRightCorner(qa, p_) = sab;
            sys.bottomLeftCorner(p_, qa) = sab.transpose();
            rhs.head(qa) = ta * zay_ - ta * tb * tb * cross_ * wzby;
        }

        Eigen::LLT<Eigen::MatrixXd> llt(sys);
        if (llt.info() != Eigen::Success)
            throw NumericalError("mixed model system is not positive definite (rank-deficient design?)");
        for (Eigen::Index i = 0; i < qa; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        const Eigen::VectorXd sol = llt.solve(rhs);

        Solution s;
        s.beta = sol.tail(p_);
        s.u.resize(factors_.size());
        Eigen::VectorXd ua = sol.head(qa);
        Eigen::VectorXd ub;
        if (qb > 0) {
            Eigen::VectorXd r = tb * zby_ - tb * zbx_ * s.beta;
            if (qa > 0) r -= ta * tb * cross_.transpose() * ua;
            ub = w.cwiseProduct(r);
        }
        double fitted = xty_.dot(s.beta);
        if (qa > 0) fitted += ta * zay_.dot(ua);
        if (qb > 0) fitted += tb * zby_.dot(ub);
        s.r2 = std::max(yty_ - fitted, std::numeric_limits<double>::min());
        if (a_ >= 0) s.u[static_cast<std::size_t>(a_)] = ua;
        if (b_ >= 0) s.u[static_cast<std::size_t>(b_)] = ub;
        s.deviance = logdet + n_ * (1.0 + std::log(2.0 * std::numbers::pi * s.r2 / n_));
        if (with_cov) {
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, p_);
            e.bottomRows(p_).setIdentity();
            s.beta_cov_unscaled = llt.solve(e).bottomRows(p_);
        }
        return s;
    }

private:
    static void accumulate(const DesignMatrix& d, const Eigen::VectorXd& y, const Factor& f, Eigen::VectorXd& counts,
                           Eigen::MatrixXd& zx, Eigen::VectorXd& zy) {
        const auto q = static_cast<Eigen::Index>(f.levels.size());
        counts = Eigen::VectorXd::Zero(q);
        zx = Eigen::MatrixXd::Zero(q, d.cols());
        zy = Eigen::VectorXd::Zero(q);
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const int g = f.level_of_row[static_cast<std::size_t>(i)];
            counts(g) += 1.0;
            zx.row(g) += d.x.row(i);
            zy(g) += y(i);
        }
    }

    std::vector<Factor> factors_;
    double n_;
    Eigen::Index p_;
    double y_shift_ = 0.0;
    int a_ = -1;
    int b_ = -1;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
    double yty_ = 0.0;
    Eigen::VectorXd da_, db_;
    Eigen::MatrixXd zax_, zbx_;
    Eigen::VectorXd zay_, zby_;
    Eigen::MatrixXd cross_;
};

std::vector<Factor> present_factors(const DesignMatrix& d, std::vector<std::string>* warnings) {
    std::vector<Factor> out;
    const std::pair<const char*, const std::vector<std::string>*> candidates[] = {
        {"language_pair", &d.language_pair}, {"participant", &d.participant}};
    for (const auto& [name, labels] : candidates) {
        if (labels->empty()) {
            if (warnings) warnings->push_back(std::string("no ") + name + " labels; factor dropped");
            continue;
        }
        Factor f = make_factor(name, *labels);
        if (f.levels.size() < 2) {
            if (warnings) warnings->push_back(std::string(name) + " has a single level; factor dropped");
            continue;
        }
        out.push_back(std::move(f));
    }
    return out;
}

void check_design(const DesignMatrix& d) {
    if (d.rows() <= d.cols())
        throw NumericalError("mixed model needs more rows than fixed-effect columns");
}

// Bounded quasi-Newton (projected BFGS with Armijo backtracking) over the
// relative variances gamma_k = theta_k^2 in [0, upper]. Working on variances
// rather than log-variances keeps the boundary estimate gamma = 0 reachable.
struct OptimResult {
    std::vector<double> gamma;
    std::vector<double> trace;
    int iterations = 0;
    bool line_search_stalled = false;
};

template <class F>
OptimResult minimize_bounded(F&& deviance, std::vector<double> x, double upper, const MixedOptions& opt) {
    const std::size_t k = x.size();
    auto clamp = [&](std::vector<double> v) {
        for (auto& e : v) e = std::clamp(e, 0.0, upper);
        return v;
    };
    auto gradient = [&](const std::vector<double>& at, double f_at) {
        std::vector<double> g(k);
        for (std::size_t i = 0; i < k; ++i) {
            const double h = 1e-5 * std::max(1.0, at[i]);
            auto hi = at;
            hi[i] += h;
            if (at[i] - h >= 0.0) {
                auto lo = at;
                lo[i] -= h;
                g[i] = (deviance(hi) - deviance(lo)) / (2.0 * h);
            } else {
                g[i] = (deviance(hi) - f_at) / h;
            }
        }
        return g;
    };

    OptimResult res;
    x = clamp(x);
    res.gamma = x;
    double f = deviance(x);
    res.trace.push_back(-0.5 * f);
    auto g = gradient(x, f);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    double gmax = 0.0;
    for (double gi : g) gmax = std::max(gmax, std::abs(gi));
    hinv /= std::max(1.0, gmax);
    bool first_update = true;

    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        std::vector<bool> active(k, false);
        for (std::size_t i = 0; i < k; ++i)
            active[i] = (x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= upper && g[i] < 0.0);

        Eigen::VectorXd gv(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < k; ++i) gv(static_cast<Eigen::Index>(i)) = active[i] ? 0.0 : g[i];
        if (gv.norm() == 0.0) return res;  // projected gradient vanishes
        Eigen::VectorXd d = -(hinv * gv);
        for (std::size_t i = 0; i < k; ++i)
            if (active[i]) d(static_cast<Eigen::Index>(i)) = 0.0;
        if (d.dot(gv) >= 0.0) {
            d = -gv / std::max(1.0, gv.cwiseAbs().maxCoeff());
            hinv.setIdentity();
            hinv /= std::max(1.0, gv.cwiseAbs().maxCoeff());
            first_update = true;
        }

        double alpha = 1.0;
        std::vector<double> x_new;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x;
            for (std::size_t i = 0; i < k; ++i) x_new[i] += alpha * d(static_cast<Eigen::Index>(i));
            x_new = clamp(x_new);
            double decrease = 0.0;
            for (std::size_t i = 0; i < k; ++i) decrease += g[i] * (x_new[i] - x[i]);
            f_new = deviance(x_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * decrease && x_new != x) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            res.line_search_stalled = true;
            return res;
        }

        auto g_new = gradient(x_new, f_new);
        Eigen::VectorXd s(static_cast<Eigen::Index>(k)), yv(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < k; ++i) {
            s(static_cast<Eigen::Index>(i)) = x_new[i] - x[i];
            yv(static_cast<Eigen::Index>(i)) = g_new[i] - g[i];
        }
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (first_update) {
                hinv = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) *
                       (sy / yv.squaredNorm());
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye =
                Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }

        const double rel = std::abs(f_new - f) / std::max(std::abs(f), 1e-300);
        x = std::move(x_new);
        f = f_new;
        g = std::move(g_new);
        res.gamma = x;
        res.trace.push_back(-0.5 * f);
        if (rel < opt.tolerance) return res;
    }
    throw ConvergenceError("mixed model did not converge in " + std::to_string(opt.max_iterations) +
                               " iterations",
                           res.trace);
}

}  // namespace

double mixed_profiled_loglik(const DesignMatrix& design, const std::vector<double>& theta) {
    check_design(design);
    CrossedInterceptModel model(design, present_factors(design, nullptr));
    if (theta.size() != model.factor_count())
        throw ContractError("expected " + std::to_string(model.factor_count()) + " relative standard deviations");
    return -0.5 * model.solve(theta).deviance;
}

FitResult fit_mixed(const DesignMatrix& design, const MixedOptions& options) {
    check_design(design);
    FitResult fit;
    fit.kind = ModelKind::mixed;
    fit.columns = design.columns;
    fit.n = static_cast<std::size_t>(design.rows());
    CrossedInterceptModel model(design, present_factors(design, &fit.warnings));
    const std::size_t k = model.factor_count();

    std::vector<double> gamma(k, 0.0);
    if (k > 0) {
        auto deviance = [&](const std::vector<double>& g) {
            std::vector<double> theta(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) theta[i] = std::sqrt(std::max(g[i], 0.0));
            return model.solve(theta).deviance;
        };
        const double upper = options.theta_upper * options.theta_upper;
        OptimResult opt = minimize_bounded(deviance, std::vector<double>(k, 1.0), upper, options);
        gamma = opt.gamma;
        fit.trace = std::move(opt.trace);
        fit.iterations = opt.iterations;
        if (opt.line_search_stalled) fit.warnings.push_back("line search stalled; stopped at best point");
    }

    std::vector<double> theta(k);
    for (std::size_t i = 0; i < k; ++i) theta[i] = std::sqrt(gamma[i]);
    const auto sol = model.solve(theta, true);
    fit.theta = theta;
    fit.beta = sol.beta;
    if (fit.beta.size() > 0 && design.columns.front() == kInterceptName) fit.beta(0) += model.y_shift();
    fit.sigma2 = sol.r2 / static_cast<double>(design.rows());
    fit.se = (fit.sigma2 * sol.beta_cov_unscaled.diagonal().array()).sqrt();
    fit.loglik = -0.5 * sol.deviance;
    if (fit.trace.empty()) fit.trace.push_back(fit.loglik);
    for (std::size_t f = 0; f < k; ++f) {
        RandomFactor rf;
        const Factor& src = model.factor(f);
        rf.name = src.name;
        rf.variance = gamma[f] * fit.sigma2;
        for (std::size_t lvl = 0; lvl < src.levels.size(); ++lvl)
            rf.intercepts[src.levels[lvl]] = theta[f] * sol.u[f](static_cast<Eigen::Index>(lvl));
        fit.factors.push_back(std::move(rf));
    }
    return fit;
}

}  // namespace tdiff
