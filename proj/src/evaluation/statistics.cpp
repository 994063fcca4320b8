#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "tdiff/errors.hpp"
#include "tdiff/evaluation.hpp"
#include "tdiff/rng.hpp"

namespace tdiff {

double paired_permutation_test(const std::vector<double>& deltas, int n_perm, std::uint64_t seed,
                               Sidedness sidedness) {
    if (deltas.empty()) throw DomainError("permutation test needs at least one paired sample");
    if (n_perm < 1) throw ConfigError("permutation count must be positive");
    const double n = static_cast<double>(deltas.size());
    double observed = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
    double scale = 0.0;
    for (double d : deltas) scale = std::max(scale, std::abs(d));
    // Floating summation order differs between observed and permuted means.
    const double slack = 1e-12 * scale;
    if (sidedness == Sidedness::two_sided) observed = std::abs(observed);

    Rng rng(seed, "permutation");
    int hits = 0;
    for (int p = 0; p < n_perm; ++p) {
        double s = 0.0;
        for (double d : deltas) s += rng.coin() ? d : -d;
        s /= n;
        if (sidedness == Sidedness::two_sided) s = std::abs(s);
        if (s >= observed - slack) ++hits;
    }
    return (1.0 + hits) / (n_perm + 1.0);
}

std::vector<VifEntry> vif(const DesignMatrix& design) {
    std::vector<VifEntry> out;
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    for (Eigen::Index j = 1; j < p; ++j) {
        VifEntry e;
        e.column = design.columns[static_cast<std::size_t>(j)];
        Eigen::VectorXd target = design.x.col(j);
        double mean = target.mean();
        double tss = (target.array() - mean).square().sum();
        if (tss <= 0.0) {
            e.value = std::numeric_limits<double>::infinity();
        } else if (p > 2) {
            Eigen::MatrixXd others(n, p - 1);
            Eigen::Index c = 0;
            for (Eigen::Index k = 0; k < p; ++k)
                if (k != j) others.col(c++) = design.x.col(k);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
            Eigen::VectorXd resid = target - others * qr.solve(target);
            double r2 = 1.0 - resid.squaredNorm() / tss;
            e.value = r2 >= 1.0 - 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - r2);
        }
        e.above_threshold = e.value > kVifWarnThreshold;
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw DomainError("correlation undefined for a constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Correlation correlate(const std::vector<double>& x, const std::vector<double>& y, CorrelationMethod method) {
    if (x.size() != y.size()) throw ContractError("correlation inputs differ in length");
    if (x.size() < 3) throw DomainError("correlation needs at least 3 observations");
    Correlation c;
    c.n = x.size();
    c.coefficient = method == CorrelationMethod::spearman ? pearson(ranks(x), ranks(y)) : pearson(x, y);
    double df = static_cast<double>(c.n) - 2.0;
    double denom = 1.0 - c.coefficient * c.coefficient;
    if (denom <= 0.0) {
        c.p_value = 0.0;
    } else {
        double t = c.coefficient * std::sqrt(df / denom);
        boost::math::students_t dist(df);
        c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
    return c;
}

std::vector<PosGroup> pos_group_summary(const std::vector<PosRow>& rows, int n_boot, std::uint64_t seed) {
    std::map<std::string, std::vector<const PosRow*>> by_tag;
    for (const auto& r : rows)
        if (!r.tag.empty()) by_tag[r.tag].push_back(&r);
    if (by_tag.empty()) throw EmptyReportError("no rows carry a part-of-speech tag");
    if (n_boot < 1) throw ConfigError("bootstrap count must be positive");

    std::vector<PosGroup> out;
    for (const auto& [tag, members] : by_tag) {
        PosGroup g;
        g.tag = tag;
        g.n = members.size();
        const std::size_t k = members.front()->predictors.size();
        for (const auto* m : members)
            if (m->predictors.size() != k) throw ContractError("rows of tag " + tag + " differ in predictor count");

        // column 0 is difficulty, then predictors
        auto value = [&](const PosRow& r, std::size_t c) { return c == 0 ? r.difficulty : r.predictors[c - 1]; };
        std::vector<double> means(k + 1, 0.0);
        for (const auto* m : members)
            for (std::size_t c = 0; c <= k; ++c) means[c] += value(*m, c);
        for (auto& v : means) v /= static_cast<double>(g.n);

        std::vector<std::vector<double>> boot(k + 1, std::vector<double>(static_cast<std::size_t>(n_boot)));
        Rng rng(seed, "bootstrap:" + tag);
        for (int b = 0; b < n_boot; ++b) {
            std::vector<double> acc(k + 1, 0.0);
            for (std::size_t i = 0; i < g.n; ++i) {
                const PosRow& r = *members[rng.below(g.n)];
                for (std::size_t c = 0; c <= k; ++c) acc[c] += value(r, c);
            }
            for (std::size_t c = 0; c <= k; ++c) boot[c][static_cast<std::size_t>(b)] = acc[c] / static_cast<double>(g.n);
        }
        std::vector<MeanCI> cis;
        for (std::size_t c = 0; c <= k; ++c)
            cis.push_back({means[c], quantile(boot[c], 0.025), quantile(boot[c], 0.975)});
        g.difficulty = cis[0];
        g.predictors.assign(cis.begin() + 1, cis.end());
        g.degenerate = g.n < 2 || g.difficulty.lower == g.difficulty.upper;
        out.push_back(std::move(g));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PosGroup& a, const PosGroup& b) { return a.difficulty.mean > b.difficulty.mean; });
    return out;
}

}  // namespace tdiff
