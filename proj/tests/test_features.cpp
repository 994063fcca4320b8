#include "doctest.h"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "support.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/features.hpp"

using namespace tdiff;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (true) {
        auto sp = s.find(' ', at);
        out.push_back(s.substr(at, sp - at));
        if (sp == std::string::npos) return out;
        at = sp + 1;
    }
}

SentencePair sentence_of(const ModelDump& d) {
    SentencePair s;
    s.pair_id = d.pair_id;
    s.source_tokens = split(d.source_text);
    s.target_tokens = split(d.target_text);
    return s;
}

TokenLogProbs logprobs(std::initializer_list<double> probs) {
    TokenLogProbs lp;
    for (double p : probs) lp.values.push_back(static_cast<float>(std::log(p)));
    return lp;
}

testing::Matrix uniform(int n) { return {n, n, std::vector<double>(static_cast<std::size_t>(n * n), 1.0 / n)}; }

}  // namespace

TEST_CASE("flow and entropy agree with the brute-force oracle") {
    Rng rng(11, "features-oracle");
    for (int trial = 0; trial < 2000; ++trial) {
        const int rows = 1 + static_cast<int>(rng.below(6));
        const int cols = 1 + static_cast<int>(rng.below(6));
        auto m = testing::random_stochastic(rng, rows, cols, 0.2);
        auto from = testing::random_subset(rng, rows);
        auto to = testing::random_subset(rng, cols);
        CHECK(std::abs(flow(m, from, to) - testing::oracle_flow(m, from, to)) <= 1e-10);
        CHECK(std::abs(attn_entropy(m, from, to) - testing::oracle_entropy(m, from, to)) <= 1e-10);
    }
}

TEST_CASE("flow examples") {
    CHECK(flow(uniform(4), IndexSet{1, 2}, IndexSet{3, 4}) == doctest::Approx(1.0));
    testing::Matrix one_hot{2, 2, {1.0, 0.0, 0.0, 1.0}};
    CHECK(flow(one_hot, IndexSet{1}, IndexSet{1}) == 1.0);
    CHECK(flow(one_hot, IndexSet{}, IndexSet{1}) == 0.0);
    CHECK(flow(one_hot, IndexSet{1}, IndexSet{}) == 0.0);
    CHECK_THROWS_AS(flow(one_hot, IndexSet{3}, IndexSet{1}), DomainError);
    CHECK_THROWS_AS(flow(one_hot, IndexSet{1}, IndexSet{3}), DomainError);

    testing::Matrix m{3, 3, {0.2, 0.3, 0.5, 0.1, 0.1, 0.8, 0.6, 0.3, 0.1}};
    CHECK(flow(m, IndexSet{1, 3}, IndexSet{2, 3}) == doctest::Approx(0.3 + 0.5 + 0.3 + 0.1));
}

TEST_CASE("entropy examples and bounds") {
    testing::Matrix one_hot{2, 3, {0, 1, 0, 0, 0, 1}};
    CHECK(attn_entropy(one_hot, IndexSet{1, 2}, IndexSet{1, 2, 3}) == 0.0);
    testing::Matrix u{2, 3, std::vector<double>(6, 1.0 / 3)};
    CHECK(attn_entropy(u, IndexSet{1, 2}, IndexSet{1, 2, 3}) == doctest::Approx(2.1972).epsilon(1e-4));
    // zero restricted mass contributes nothing
    CHECK(attn_entropy(one_hot, IndexSet{1}, IndexSet{1, 3}) == 0.0);
    CHECK_THROWS_AS(attn_entropy(one_hot, IndexSet{1}, IndexSet{4}), DomainError);

    Rng rng(12, "entropy-bounds");
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        auto m = testing::random_stochastic(rng, n, n, 0.2);
        auto from = testing::random_subset(rng, n);
        auto to = testing::random_subset(rng, n);
        const double h = attn_entropy(m, from, to);
        CHECK(h >= 0.0);
        const double bound = to.empty() ? 0.0 : static_cast<double>(from.size()) * std::log(static_cast<double>(to.size()));
        CHECK(h <= bound + 1e-12);
    }
}

TEST_CASE("normalization") {
    CHECK(normalize_feature(0.6, 0.5) == doctest::Approx(1.2));
    CHECK(normalize_feature(0.0, 0.0) == 0.0);
    CHECK(normalize_feature(0.3, 0.0) == 0.0);
    // uniform attention: any flow equals its dummy
    Rng rng(13, "normalize");
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(7));
        auto from = testing::random_subset(rng, n);
        auto to = testing::random_subset(rng, n);
        UniformAttention dummy(n, n);
        const double raw = flow(uniform(n), from, to);
        const double expect = from.empty() || to.empty() ? 0.0 : 1.0;
        CHECK(normalize_feature(raw, flow(dummy, from, to)) == doctest::Approx(expect));
    }
    // a single-element entropy support is the 0/0 case
    UniformAttention d(3, 3);
    CHECK(normalize_feature(attn_entropy(uniform(3), IndexSet{1}, IndexSet{2}), attn_entropy(d, IndexSet{1}, IndexSet{2})) ==
          0.0);
}

TEST_CASE("surprisal") {
    // entry i belongs to position i + 2
    auto lp = logprobs({0.5, 0.25, 1.0, 0.125});
    CHECK(lm_surprisal(lp, IndexSet{4}) == 0.0);
    CHECK(lm_surprisal(lp, IndexSet{2, 3}) == doctest::Approx(1.0397).epsilon(1e-4));
    CHECK(mt_surprisal(lp, IndexSet{4}) == 0.0);
    CHECK_THROWS_AS(lm_surprisal(lp, IndexSet{}), DomainError);
    CHECK_THROWS_AS(lm_surprisal(lp, IndexSet{1}), DomainError);
    CHECK_THROWS_AS(lm_surprisal(lp, IndexSet{6}), DomainError);
    CHECK_THROWS_AS(mt_surprisal(lp, IndexSet{2}, Side::source), UnsupportedError);

    // additive before the length normalization
    const IndexSet a{2, 5}, b{3};
    CHECK(surprisal_sum(lp, a.united(b)).total ==
          doctest::Approx(surprisal_sum(lp, a).total + surprisal_sum(lp, b).total));
    CHECK(surprisal_sum(lp, a.united(b)).count == 3);
    // whole sentence equals the sentence mean
    double total = 0.0;
    for (float v : lp.values) total -= v;
    CHECK(lm_surprisal(lp, IndexSet{2, 3, 4, 5}) == doctest::Approx(total / 4));
}

TEST_CASE("uniform dump gives unit features") {
    ModelDump d = testing::uniform_dump(4, 3);
    auto src = source_feature_set(d, IndexSet{3});
    for (Feature f : kSourceAttentionFeatures) CHECK(src[f].value() == doctest::Approx(1.0).epsilon(1e-6));

    // last target word: every support has more than one element
    auto tgt = target_feature_set(d, IndexSet{4});
    for (Feature f : kTargetAttentionFeatures) CHECK(tgt[f].value() == doctest::Approx(1.0).epsilon(1e-6));

    // first target word: empty preceding context, single-element prefix
    auto first = target_feature_set(d, IndexSet{2});
    CHECK(first[Feature::f_d_v_ctx].value() == 0.0);
    CHECK(first[Feature::H_d_v_prefix].value() == 0.0);
    CHECK(first[Feature::f_c_v_eos].value() == doctest::Approx(1.0).epsilon(1e-6));

    // whole sentence has no context
    auto whole = source_feature_set(d, IndexSet{2, 3, 4, 5});
    CHECK(whole[Feature::f_e_u_ctx].value() == 0.0);
    CHECK(whole[Feature::f_e_ctx_u].value() == 0.0);

    CHECK_THROWS(source_feature_set(d, IndexSet{1}));
    CHECK_THROWS(target_feature_set(d, IndexSet{5}));
}

TEST_CASE("averaging identical heads equals the single-head value") {
    Rng rng(14, "identical-heads");
    auto m = testing::random_stochastic(rng, 5, 5, 0.0);
    ModelDump one = testing::uniform_dump(3, 3, 1, 1);
    ModelDump many = testing::uniform_dump(3, 3, 3, 4);
    for (ModelDump* d : {&one, &many}) {
        auto& t = d->enc_attn;
        for (std::size_t block = 0; block < static_cast<std::size_t>(t.layers * t.heads); ++block)
            for (std::size_t i = 0; i < 25; ++i) t.data[block * 25 + i] = static_cast<float>(m.a[i]);
    }
    auto a = source_feature_set(one, IndexSet{2, 3});
    auto b = source_feature_set(many, IndexSet{2, 3});
    for (Feature f : {Feature::f_e_uu, Feature::f_e_u_ctx, Feature::f_e_u_eos, Feature::f_e_ctx_u, Feature::H_e_u_x})
        CHECK(std::abs(a[f].value() - b[f].value()) <= 1e-12);
}

TEST_CASE("flow decomposes over a word, its context and the specials") {
    for (const char* file : {"toy-1.tdwb", "toy-2.tdwb"}) {
        ModelDump d = read_dump(testing::fixtures() / "toy_dumps" / file);
        const IndexSet specials = d.nmt_source.special();
        for (int l = 0; l < d.layers; ++l)
            for (int h = 0; h < d.heads; ++h) {
                auto a = d.enc_attn.view(l, h);
                for (int p : d.nmt_source.non_special()) {
                    IndexSet u{p};
                    IndexSet ctx = complement_source(u, d.source_length()).without(specials);
                    const double sum = flow(a, u, u) + flow(a, u, ctx) + flow(a, u, specials);
                    CHECK(sum == doctest::Approx(static_cast<double>(u.size())).epsilon(1e-6));
                }
            }
    }
}

TEST_CASE("toy fixtures match the independent feature computation") {
    std::ifstream in(testing::fixtures() / "toy_dumps" / "expected.json");
    const json all = json::parse(in);
    FrequencyTable freq({{"the", 5e7}}, 1.0);
    int checked = 0;
    for (const auto& pair : all["pairs"]) {
        ModelDump d = read_dump(testing::fixtures() / "toy_dumps" / pair["file"].get<std::string>());
        SentencePair s = sentence_of(d);
        DumpMaps maps = build_maps(d, s);
        for (const auto& w : pair["words"]) {
            const Side side = w["side"] == "source" ? Side::source : Side::target;
            CAPTURE(pair["pair_id"].get<std::string>());
            CAPTURE(w["word"].get<int>());
            FeatureVector got = extract_features(d, maps, s, {side, IndexSet{w["word"].get<int>()}}, freq);
            for (const auto& [name, value] : w["features"].items()) {
                CAPTURE(name);
                CHECK(std::abs(got[feature_from_name(name)].value() - value.get<double>()) <= 1e-10);
                ++checked;
            }
            CHECK(got[Feature::length_tokens].value() == static_cast<double>(w["nmt"].size()));
            if (side == Side::source) CHECK_FALSE(got[Feature::s_mt]);
        }
    }
    CHECK(checked == 5 * 7 + 5 * 7);
}

TEST_CASE("build_maps refuses a dump of another sentence") {
    ModelDump d = read_dump(testing::fixtures() / "toy_dumps" / "toy-1.tdwb");
    SentencePair s = sentence_of(d);
    s.target_tokens[0] = "der";
    CHECK_THROWS_AS(build_maps(d, s), MappingError);
    s = sentence_of(d);
    s.pair_id = "other";
    CHECK_THROWS_AS(build_maps(d, s), MappingError);
}

TEST_CASE("control features") {
    SentencePair s;
    s.pair_id = "c";
    for (int i = 1; i <= 10; ++i) s.source_tokens.push_back("w" + std::to_string(i));
    s.target_tokens = {"x"};
    FrequencyTable freq({{"w3", 1000.0}, {"w4", 10.0}}, 2.0);

    auto one = control_features({Side::source, IndexSet{3}}, s, freq, 2);
    CHECK(one.mean_pos_quantile == doctest::Approx(0.3));
    CHECK(one.length_tokens == 2.0);
    CHECK(one.mean_log_freq == doctest::Approx(std::log(1000.0)));
    CHECK(one.oov_words.empty());

    auto two = control_features({Side::source, IndexSet{4, 9}}, s, freq, 3);
    CHECK(two.mean_log_freq == doctest::Approx((std::log(10.0) + std::log(2.0)) / 2));
    CHECK(two.mean_pos_quantile == doctest::Approx(0.65));
    CHECK(two.oov_words == std::vector<std::string>{"w9"});

    // case-folded lookup
    s.source_tokens[2] = "W3";
    CHECK(control_features({Side::source, IndexSet{3}}, s, freq, 1).oov_words.empty());
    CHECK_THROWS_AS(control_features({Side::source, IndexSet{11}}, s, freq, 1), DomainError);
    CHECK_THROWS_AS(FrequencyTable({{"a", 1.0}}, 0.0), ConfigError);
    CHECK(FrequencyTable({{"a", 4.0}, {"b", 3.0}}).floor() == 3.0);
}

TEST_CASE("frequency table file") {
    auto dir = testing::scratch("features_freq");
    std::ofstream(dir / "f.tsv") << "# word\tfreq\nthe\t50000000\ncat 1200\n";
    auto t = FrequencyTable::load(dir / "f.tsv", 0.5);
    CHECK(t.size() == 2);
    CHECK(t.lookup("cat").value() == 1200.0);
    CHECK_FALSE(t.lookup("dog"));
    std::ofstream(dir / "bad.tsv") << "the\n";
    CHECK_THROWS_AS(FrequencyTable::load(dir / "bad.tsv"), ConfigError);
    CHECK_THROWS_AS(FrequencyTable::load(dir / "absent.tsv"), ConfigError);
}

TEST_CASE("average translation duration") {
    CHECK(avg_translation_duration(400.0, 1) == doctest::Approx(std::log(400.0)));
    CHECK(avg_translation_duration(400.0, 2) == doctest::Approx(std::log(200.0)));
    CHECK(avg_translation_duration(900.0, 3) == doctest::Approx(std::log(300.0)));
    CHECK_THROWS_AS(avg_translation_duration(400.0, 0), DomainError);
}

TEST_CASE("feature names round trip") {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const auto f = static_cast<Feature>(i);
        CHECK(feature_from_name(feature_name(f)) == f);
    }
    CHECK_THROWS_AS(feature_from_name("f_x"), ConfigError);
}
