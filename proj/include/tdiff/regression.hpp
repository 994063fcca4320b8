#pragma once

// Linear models used for held-out likelihood comparisons: ordinary least
// squares and a maximum-likelihood mixed model with crossed random intercepts
// for language pair and participant.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tdiff {

inline constexpr const char* kInterceptName = "(Intercept)";

struct DesignMatrix {
    std::vector<std::string> columns;  // columns[0] is the intercept
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> language_pair;  // per row; may be empty for OLS
    std::vector<std::string> participant;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }
};

// Adds the intercept column. predictors[j][i] is predictor j at row i.
DesignMatrix make_design(const std::vector<std::string>& names,
                         const std::vector<std::vector<double>>& predictors, const std::vector<double>& y,
                         std::vector<std::string> language_pair = {}, std::vector<std::string> participant = {});

DesignMatrix select_rows(const DesignMatrix& design, const std::vector<Eigen::Index>& rows);

struct ScalingRecord {
    std::vector<std::string> columns;
    Eigen::VectorXd mean;  // intercept entry is 0
    Eigen::VectorXd sd;    // intercept entry is 1
};

// Column means and population standard deviations of the training rows.
// Throws ConfigError naming a zero-variance predictor.
ScalingRecord fit_scaling(const DesignMatrix& train);
DesignMatrix apply_scaling(const ScalingRecord& scaling, const DesignMatrix& design);

struct StandardizeResult {
    DesignMatrix train;
    DesignMatrix applied;
    ScalingRecord scaling;
};

StandardizeResult standardize(const DesignMatrix& train, const DesignMatrix& apply_to);

enum class ModelKind { ols, mixed };

struct RandomFactor {
    std::string name;  // "language_pair" or "participant"
    double variance = 0.0;
    std::map<std::string, double> intercepts;  // BLUP per training level
};

struct FitResult {
    ModelKind kind = ModelKind::ols;
    std::vector<std::string> columns;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    double sigma2 = 0.0;
    std::vector<RandomFactor> factors;
    std::size_t n = 0;
    double loglik = 0.0;        // training log-likelihood at the estimate (ML)
    std::vector<double> theta;  // relative random-effect standard deviations, per factor
    int iterations = 0;
    bool converged = true;
    std::vector<double> trace;  // log-likelihood after each accepted optimizer step
    std::vector<std::string> warnings;

    const RandomFactor* factor(const std::string& name) const;
};

// Least squares via column-pivoted QR; sigma2 = RSS / (n - p).
// Throws NumericalError naming the dependent columns when rank deficient.
FitResult fit_ols(const DesignMatrix& design);

struct MixedOptions {
    double tolerance = 1e-8;  // relative change of the log-likelihood
    int max_iterations = 500;
    double theta_upper = 1e3;
};

// Crossed random intercepts for language pair and participant, fitted by
// maximizing the profiled Gaussian likelihood over the relative standard
// deviations with a bounded quasi-Newton search. A factor with fewer than two
// levels is dropped with a warning.
FitResult fit_mixed(const DesignMatrix& design, const MixedOptions& options = {});

// Profiled ML log-likelihood of the mixed model at fixed relative standard
// deviations (one per present factor, in the order language_pair, participant).
double mixed_profiled_loglik(const DesignMatrix& design, const std::vector<double>& theta);

// Gaussian log-likelihood of y given X beta and a common variance.
double gaussian_loglik(const DesignMatrix& design, const Eigen::VectorXd& beta, double sigma2);

enum class HeldoutMode {
    conditional,  // seen groups use their predicted intercept, unseen add their variance
    marginal,     // random effects integrated out for every row
};

// Per-row Gaussian log density of held-out rows. Throws ContractError when the
// design columns differ from the fit.
std::vector<double> heldout_loglik(const FitResult& fit, const DesignMatrix& heldout,
                                   HeldoutMode mode = HeldoutMode::conditional);

}  // namespace tdiff
