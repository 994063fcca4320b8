#pragma once

// Shared test helpers: scratch directories, random attention matrices and the
// brute-force flow/entropy oracles.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "tdiff/index_set.hpp"
#include "tdiff/rng.hpp"

namespace testing {

inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::path(TDIFF_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path fixtures() { return TDIFF_FIXTURES_DIR; }

// Dense row-major matrix with 1-based access, row-stochastic by construction.
struct Matrix {
    int r = 0, c = 0;
    std::vector<double> a;
    int rows() const { return r; }
    int cols() const { return c; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>((i - 1) * c + (j - 1))]; }
};

inline Matrix random_stochastic(tdiff::Rng& rng, int rows, int cols, double one_hot_chance = 0.1) {
    Matrix m{rows, cols, std::vector<double>(static_cast<std::size_t>(rows * cols))};
    for (int i = 0; i < rows; ++i) {
        double total = 0.0;
        if (rng.uniform() < one_hot_chance) {
            m.a[static_cast<std::size_t>(i * cols) + rng.below(static_cast<std::uint64_t>(cols))] = 1.0;
            continue;
        }
        for (int j = 0; j < cols; ++j) total += m.a[static_cast<std::size_t>(i * cols + j)] = rng.uniform();
        for (int j = 0; j < cols; ++j) m.a[static_cast<std::size_t>(i * cols + j)] /= total;
    }
    return m;
}

inline tdiff::IndexSet random_subset(tdiff::Rng& rng, int n) {
    std::vector<int> v;
    for (int i = 1; i <= n; ++i)
        if (rng.coin()) v.push_back(i);
    return tdiff::IndexSet(v);
}

// Written against the formulas with explicit double loops over full ranges.
inline double oracle_flow(const Matrix& m, const tdiff::IndexSet& from, const tdiff::IndexSet& to) {
    double s = 0.0;
    for (int k = 1; k <= m.rows(); ++k)
        for (int l = 1; l <= m.cols(); ++l)
            if (from.contains(k) && to.contains(l)) s += m(k, l);
    return s;
}

inline double oracle_entropy(const Matrix& m, const tdiff::IndexSet& from, const tdiff::IndexSet& to) {
    double h = 0.0;
    for (int k = 1; k <= m.rows(); ++k) {
        if (!from.contains(k)) continue;
        double z = 0.0;
        for (int l = 1; l <= m.cols(); ++l)
            if (to.contains(l)) z += m(k, l);
        if (z <= 0.0) continue;
        for (int l = 1; l <= m.cols(); ++l) {
            if (!to.contains(l)) continue;
            double p = m(k, l) / z;
            if (p > 0.0) h -= p * std::log(p);
        }
    }
    return h;
}

}  // namespace testing

#include "tdiff/dump.hpp"

namespace testing {

// Dump whose every attention row is uniform over the full row. Each word is
// one subword; sequences carry a leading tag and a trailing eos.
inline tdiff::ModelDump uniform_dump(int source_words, int target_words, int layers = 2, int heads = 3) {
    using namespace tdiff;
    auto seq = [](int words, const char* tag) {
        TokenSequence s;
        s.tokens.push_back({tag, {-1, -1}, kSpecial | kBos});
        int at = 0;
        for (int w = 1; w <= words; ++w) {
            s.tokens.push_back({"w" + std::to_string(w), {at, at + 2}, 0});
            at += 3;
        }
        s.tokens.push_back({"</s>", {-1, -1}, kSpecial | kEos});
        return s;
    };
    auto tensor = [&](int rows, int cols) {
        AttentionTensor t{layers, heads, rows, cols, {}};
        t.data.assign(t.expected_size(), 1.0f / static_cast<float>(cols));
        return t;
    };
    ModelDump d;
    d.pair_id = "uniform";
    d.layers = layers;
    d.heads = heads;
    d.nmt_source = seq(source_words, "src_tag");
    d.nmt_target = seq(target_words, "tgt_tag");
    const int S = d.nmt_source.size(), T = d.nmt_target.size();
    d.enc_attn = tensor(S, S);
    d.cross_attn = tensor(T, S);
    d.dec_attn = tensor(T, T);
    d.mt_target.values.assign(static_cast<std::size_t>(T - 1), -0.5f);
    return d;
}

}  // namespace testing

#include "tdiff/regression.hpp"

namespace testing {

struct CrossedTruth {
    std::vector<double> beta;  // intercept first
    double sd_lang = 0.0;
    double sd_part = 0.0;
    double sd_resid = 1.0;
};

// Every participant contributes `per_participant` rows; each row draws its
// language pair uniformly, so the two factors are crossed.
inline tdiff::DesignMatrix simulate_crossed(tdiff::Rng& rng, const CrossedTruth& truth, int n_lang, int n_part,
                                            int per_participant) {
    const std::size_t p = truth.beta.size() - 1;
    std::vector<double> lang_fx(static_cast<std::size_t>(n_lang)), part_fx(static_cast<std::size_t>(n_part));
    for (auto& v : lang_fx) v = rng.normal(0.0, truth.sd_lang);
    for (auto& v : part_fx) v = rng.normal(0.0, truth.sd_part);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    std::vector<std::vector<double>> cols(p);
    std::vector<double> y;
    std::vector<std::string> lang, part;
    for (int g = 0; g < n_part; ++g)
        for (int r = 0; r < per_participant; ++r) {
            const auto l = rng.below(static_cast<std::uint64_t>(n_lang));
            double mean = truth.beta[0] + lang_fx[l] + part_fx[static_cast<std::size_t>(g)];
            for (std::size_t j = 0; j < p; ++j) {
                const double x = rng.normal();
                cols[j].push_back(x);
                mean += truth.beta[j + 1] * x;
            }
            y.push_back(mean + rng.normal(0.0, truth.sd_resid));
            lang.push_back("L" + std::to_string(l));
            part.push_back("P" + std::to_string(g));
        }
    return tdiff::make_design(names, cols, y, lang, part);
}

}  // namespace testing
