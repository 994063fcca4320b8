#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/evaluation.hpp"

using namespace tdiff;

namespace {

struct CvData {
    DesignMatrix design;
    std::vector<int> fold;
    std::vector<std::string> sentence;
};

// 100 sentences of 10 rows; sentence s sits in fold s % 10.
CvData cv_data(Rng& rng, bool noise_feature = false) {
    CvData out;
    std::vector<double> x, z, y;
    std::vector<std::string> lang, part;
    for (int s = 0; s < 100; ++s)
        for (int r = 0; r < 10; ++r) {
            x.push_back(rng.normal());
            z.push_back(rng.normal());
            y.push_back(1.0 + 0.5 * x.back() + rng.normal());
            out.fold.push_back(s % 10);
            out.sentence.push_back("s" + std::to_string(s));
            lang.push_back(s % 2 ? "en-da" : "en-de");
            part.push_back("P" + std::to_string(r));
        }
    if (noise_feature)
        out.design = make_design({"x", "z"}, {x, z}, y, lang, part);
    else
        out.design = make_design({"x"}, {x}, y, lang, part);
    return out;
}

double ks_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        d = std::max({d, static_cast<double>(i + 1) / n - p[i], p[i] - static_cast<double>(i) / n});
    return d;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) less += w < v[i], equal += w == v[i];
        r[i] = less + (equal + 1) / 2;
    }
    return r;
}

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i], sy += y[i], sxx += x[i] * x[i], syy += y[i] * y[i], sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("cross validation scores every row exactly once") {
    Rng rng(31, "cv");
    auto data = cv_data(rng);
    ModelSpec ols{ModelKind::ols};
    auto cv = cross_validate(data.design, data.fold, data.sentence, 10, ols);
    REQUIRE(cv.llh.size() == 1000);
    CHECK(cv.fits.size() == 10);
    CHECK(cv.fitted_folds == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    for (double v : cv.llh) CHECK(std::isfinite(v));

    // fold 3 by hand: standardize on the other folds, fit, score
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < 1000; ++i) (data.fold[static_cast<std::size_t>(i)] == 3 ? test : train).push_back(i);
    auto s = standardize(select_rows(data.design, train), select_rows(data.design, test));
    auto expect = heldout_loglik(fit_ols(s.train), s.applied);
    for (std::size_t k = 0; k < test.size(); ++k)
        CHECK(cv.llh[static_cast<std::size_t>(test[k])] == doctest::Approx(expect[k]).epsilon(1e-12));

    // fold totals add up to the concatenated total
    auto d = delta_llh(cv.llh, std::vector<double>(1000, 0.0), data.fold, 10);
    double by_fold = 0.0;
    for (double m : d.fold_means) by_fold += m * 100;
    CHECK(by_fold == doctest::Approx(std::accumulate(cv.llh.begin(), cv.llh.end(), 0.0)));

    // deterministic
    CHECK(cross_validate(data.design, data.fold, data.sentence, 10, ols).llh == cv.llh);

    ModelSpec mixed;
    auto cvm = cross_validate(data.design, data.fold, data.sentence, 10, mixed);
    CHECK(cvm.llh.size() == 1000);
    CHECK(cvm.fits[0].kind == ModelKind::mixed);
}

TEST_CASE("cross validation guards") {
    Rng rng(32, "cv-guard");
    auto data = cv_data(rng);
    ModelSpec ols{ModelKind::ols};
    SUBCASE("a sentence in two folds") {
        auto fold = data.fold;
        fold[0] = (fold[0] + 1) % 10;
        CHECK_THROWS_AS(cross_validate(data.design, fold, data.sentence, 10, ols), ContractError);
    }
    SUBCASE("fold id out of range") {
        auto fold = data.fold;
        for (std::size_t i = 0; i < 10; ++i) fold[i] = 10;
        CHECK_THROWS_AS(cross_validate(data.design, fold, data.sentence, 10, ols), ContractError);
    }
    SUBCASE("length mismatch") {
        auto fold = data.fold;
        fold.pop_back();
        CHECK_THROWS_AS(cross_validate(data.design, fold, data.sentence, 10, ols), ContractError);
    }
    SUBCASE("empty training split") {
        std::vector<int> fold(1000, 0);
        CHECK_THROWS_AS(cross_validate(data.design, fold, data.sentence, 2, ols), FoldError);
    }
    SUBCASE("folds without rows are skipped") {
        auto fold = data.fold;
        for (auto& f : fold) f = f == 9 ? 8 : f;
        auto cv = cross_validate(data.design, fold, data.sentence, 10, ols);
        CHECK(cv.fits.size() == 9);
        CHECK(cv.llh.size() == 1000);
    }
}

TEST_CASE("delta llh") {
    const std::vector<double> a{-1.0, -2.0, -0.5, -1.5}, b{-1.5, -2.0, -1.0, -1.0};
    auto same = delta_llh(a, a);
    for (double d : same.deltas) CHECK(d == 0.0);
    CHECK(same.mean == 0.0);

    auto d = delta_llh(a, b, {0, 0, 1, 1}, 3);
    CHECK(d.deltas == std::vector<double>{0.5, 0.0, 0.5, -0.5});
    CHECK(d.mean == doctest::Approx(0.125));
    REQUIRE(d.fold_means.size() == 3);
    CHECK(d.fold_means[0] == doctest::Approx(0.25));
    CHECK(d.fold_means[1] == doctest::Approx(0.0));
    CHECK(std::isnan(d.fold_means[2]));
    CHECK_FALSE(d.p_value);

    CHECK_THROWS_AS(delta_llh(a, {1.0}), ContractError);
    CHECK_THROWS_AS(delta_llh(a, b, {0, 1}, 2), ContractError);
}

TEST_CASE("a pure-noise predictor does not help out of sample") {
    int not_better = 0;
    const int sims = 40;
    for (int s = 0; s < sims; ++s) {
        Rng rng(33, "noise-" + std::to_string(s));
        auto with = cv_data(rng, true);
        auto base_cols = make_design({"x"}, {std::vector<double>(with.design.x.col(1).data(), with.design.x.col(1).data() + 1000)},
                                     std::vector<double>(with.design.y.data(), with.design.y.data() + 1000));
        ModelSpec ols{ModelKind::ols};
        auto a = cross_validate(with.design, with.fold, with.sentence, 10, ols);
        auto b = cross_validate(base_cols, with.fold, with.sentence, 10, ols);
        not_better += delta_llh(a.llh, b.llh).mean <= 0.0;
    }
    CHECK(not_better >= sims * 6 / 10);
}

TEST_CASE("paired permutation test") {
    CHECK(paired_permutation_test(std::vector<double>(50, 0.0), 1000, 1) == 1.0);
    CHECK(paired_permutation_test(std::vector<double>(50, 1.0), 1000, 1) == doctest::Approx(1.0 / 1001));
    CHECK(paired_permutation_test(std::vector<double>(50, -1.0), 1000, 1) == 1.0);
    CHECK(paired_permutation_test(std::vector<double>(50, -1.0), 1000, 1, Sidedness::two_sided) ==
          doctest::Approx(1.0 / 1001));
    CHECK_THROWS(paired_permutation_test({}, 1000, 1));

    Rng rng(34, "perm");
    std::vector<double> d(200);
    for (auto& v : d) v = rng.normal(0.05, 1.0);
    const double p = paired_permutation_test(d, 1000, 99);
    CHECK(p == paired_permutation_test(d, 1000, 99));
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    // the p-value lives on the 1/(n+1) grid
    CHECK(std::abs(p * 1001 - std::round(p * 1001)) < 1e-9);

    // single-sample exact null: the flip either keeps or negates the value
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const double q = paired_permutation_test({2.0}, 1, seed);
        CHECK((q == 0.5 || q == 1.0));
    }
}

TEST_CASE("permutation p-values are uniform under the null") {
    std::vector<double> p;
    for (int r = 0; r < 200; ++r) {
        Rng rng(35, "null-" + std::to_string(r));
        std::vector<double> d(100);
        for (auto& v : d) v = rng.normal();
        p.push_back(paired_permutation_test(d, 1000, static_cast<std::uint64_t>(r)));
    }
    CHECK(ks_uniform(p) < 0.1);
}

TEST_CASE("variance inflation factors") {
    auto orth = make_design({"a", "b"}, {{1, -1, 1, -1}, {1, 1, -1, -1}}, {0, 0, 0, 0});
    auto v = vif(orth);
    REQUIRE(v.size() == 2);
    for (const auto& e : v) {
        CHECK(e.value == doctest::Approx(1.0));
        CHECK_FALSE(e.above_threshold);
    }

    auto dup = make_design({"a", "b", "c"}, {{1, 2, 3, 4, 6}, {1, 2, 3, 4, 6}, {0, 1, 0, 1, 1}}, {0, 0, 0, 0, 0});
    auto w = vif(dup);
    CHECK(std::isinf(w[0].value));
    CHECK(std::isinf(w[1].value));
    CHECK(w[0].above_threshold);
    CHECK(std::isfinite(w[2].value));

    // diagonal of the inverse correlation matrix
    Rng rng(36, "vif");
    std::vector<std::vector<double>> cols(3);
    for (int i = 0; i < 300; ++i) {
        const double base = rng.normal();
        cols[0].push_back(base + 0.5 * rng.normal());
        cols[1].push_back(base + 0.8 * rng.normal());
        cols[2].push_back(rng.normal());
    }
    auto d = make_design({"p", "q", "r"}, cols, std::vector<double>(300, 0.0));
    Eigen::MatrixXd c(300, 3);
    for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd col = d.x.col(j + 1).array() - d.x.col(j + 1).mean();
        c.col(j) = col / col.norm();
    }
    const Eigen::MatrixXd inv = (c.transpose() * c).inverse();
    auto got = vif(d);
    for (int j = 0; j < 3; ++j) CHECK(got[static_cast<std::size_t>(j)].value == doctest::Approx(inv(j, j)).epsilon(1e-10));
    CHECK(got[0].above_threshold == (inv(0, 0) > kVifWarnThreshold));
}

TEST_CASE("correlations") {
    std::vector<double> x{1, 2, 3, 4, 5, 6}, neg, y{2.0, 1.0, 4.0, 3.0, 7.0, 5.0};
    for (double v : x) neg.push_back(-v);
    CHECK(correlate(x, x).coefficient == doctest::Approx(1.0));
    CHECK(correlate(x, x).p_value == 0.0);
    CHECK(correlate(x, neg).coefficient == doctest::Approx(-1.0));
    CHECK(correlate(x, neg, CorrelationMethod::spearman).coefficient == doctest::Approx(-1.0));
    CHECK(correlate(x, y).coefficient == doctest::Approx(brute_pearson(x, y)).epsilon(1e-12));
    CHECK(correlate(x, y).n == 6);

    // ties get average ranks
    std::vector<double> t{1, 2, 2, 3, 5, 5};
    CHECK(correlate(t, y, CorrelationMethod::spearman).coefficient ==
          doctest::Approx(brute_pearson(ranks(t), ranks(y))).epsilon(1e-12));

    // r at the two-sided 5% critical value for 8 degrees of freedom
    const double r = 0.6319;
    std::vector<double> a(10), b(10);
    Rng rng(37, "critical");
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    // make b exactly correlated r with a: b' = r * za + sqrt(1 - r^2) * residual
    Eigen::Map<Eigen::VectorXd> va(a.data(), 10), vb(b.data(), 10);
    va.array() -= va.mean();
    va /= va.norm();
    vb.array() -= vb.mean();
    vb -= vb.dot(va) * va;
    vb /= vb.norm();
    std::vector<double> c(10);
    for (int i = 0; i < 10; ++i) c[static_cast<std::size_t>(i)] = r * va(i) + std::sqrt(1 - r * r) * vb(i);
    auto k = correlate(a, c);
    CHECK(k.coefficient == doctest::Approx(r).epsilon(1e-10));
    CHECK(k.p_value == doctest::Approx(0.05).epsilon(2e-3));

    CHECK_THROWS_AS(correlate({1, 1, 1}, {1, 2, 3}), DomainError);
    CHECK_THROWS_AS(correlate({1, 2}, {1, 2}), DomainError);
    CHECK_THROWS_AS(correlate({1, 2, 3}, {1, 2}), ContractError);
}

TEST_CASE("part-of-speech summary") {
    std::vector<PosRow> rows{{"NOUN", 6.0, {1.0}}, {"NOUN", 7.0, {3.0}}, {"VERB", 8.0, {0.5}},
                             {"VERB", 9.0, {1.5}}, {"ADV", 5.0, {4.0}}};
    auto g = pos_group_summary(rows, 500, 3);
    REQUIRE(g.size() == 3);
    CHECK(g[0].tag == "VERB");
    CHECK(g[1].tag == "NOUN");
    CHECK(g[2].tag == "ADV");
    CHECK(g[0].n == 2);
    CHECK(g[0].difficulty.mean == 8.5);
    CHECK(g[1].predictors[0].mean == 2.0);
    CHECK(g[0].difficulty.lower >= 8.0);
    CHECK(g[0].difficulty.upper <= 9.0);
    CHECK(g[0].difficulty.lower < g[0].difficulty.upper);
    CHECK_FALSE(g[0].degenerate);
    CHECK(g[2].degenerate);
    CHECK(g[2].difficulty.lower == 5.0);
    CHECK(g[2].difficulty.upper == 5.0);

    auto again = pos_group_summary(rows, 500, 3);
    CHECK(again[0].difficulty.lower == g[0].difficulty.lower);
    CHECK_THROWS_AS(pos_group_summary({}, 500, 3), EmptyReportError);
}
