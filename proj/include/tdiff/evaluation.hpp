#pragma once

// Cross-validated held-out likelihood comparisons and the statistics reported
// alongside them.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdiff/regression.hpp"

namespace tdiff {

struct ModelSpec {
    ModelKind kind = ModelKind::mixed;
    HeldoutMode heldout = HeldoutMode::conditional;
    MixedOptions mixed;
};

struct CvResult {
    std::vector<double> llh;        // per row of the input design
    std::vector<FitResult> fits;    // per fold; folds without test rows are skipped
    std::vector<int> fitted_folds;
};

// Trains on k-1 folds and scores the held-out fold, predictors standardized on
// the training rows. Throws ContractError if any sentence appears in two folds
// and FoldError when a training split is empty.
CvResult cross_validate(const DesignMatrix& design, const std::vector<int>& fold_of_row,
                        const std::vector<std::string>& sentence_of_row, int folds, const ModelSpec& spec);

struct DeltaLLH {
    std::vector<double> deltas;  // a - b per sample
    double mean = 0.0;
    std::vector<double> fold_means;  // NaN for folds without samples
    std::optional<double> p_value;
};

DeltaLLH delta_llh(const std::vector<double>& model_a, const std::vector<double>& model_b,
                   const std::vector<int>& fold_of_row = {}, int folds = 0);

enum class Sidedness { greater, two_sided };

// Sign-flip permutation test on the mean of paired deltas.
// p = (1 + #{permuted statistic >= observed}) / (n_perm + 1).
double paired_permutation_test(const std::vector<double>& deltas, int n_perm, std::uint64_t seed,
                               Sidedness sidedness = Sidedness::greater);

struct VifEntry {
    std::string column;
    double value = 1.0;  // +inf under perfect collinearity
    bool above_threshold = false;
};

inline constexpr double kVifWarnThreshold = 2.5;

std::vector<VifEntry> vif(const DesignMatrix& design);

enum class CorrelationMethod { pearson, spearman };

struct Correlation {
    double coefficient = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Two-sided p-value from the t approximation. Throws DomainError when either
// input has zero variance or n < 3.
Correlation correlate(const std::vector<double>& x, const std::vector<double>& y,
                      CorrelationMethod method = CorrelationMethod::pearson);

struct PosRow {
    std::string tag;
    double difficulty = 0.0;
    std::vector<double> predictors;
};

struct MeanCI {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct PosGroup {
    std::string tag;
    std::size_t n = 0;
    MeanCI difficulty;
    std::vector<MeanCI> predictors;
    bool degenerate = false;  // single row: the interval collapses to the mean
};

// Per-tag means with 95% percentile bootstrap intervals, sorted by mean
// difficulty (highest first). Throws EmptyReportError without rows.
std::vector<PosGroup> pos_group_summary(const std::vector<PosRow>& rows, int n_boot, std::uint64_t seed);

}  // namespace tdiff
