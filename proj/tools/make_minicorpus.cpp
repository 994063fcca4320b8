// Writes the bundled synthetic corpus: study tables, model dumps, a frequency
// list and a run config. Production duration is driven by the translation
// surprisal of the target unit, so that feature should come out significant.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"

#include "tdiff/dump.hpp"
#include "tdiff/features.hpp"
#include "tdiff/ingest.hpp"
#include "tdiff/rng.hpp"
#include "tdiff/text_io.hpp"

namespace fs = std::filesystem;
using namespace tdiff;

namespace {

constexpr int kLayers = 2;
constexpr int kHeads = 2;
constexpr int kSentencesPerPair = 8;
const std::vector<std::string> kParticipants{"P01", "P02", "P03"};
const std::vector<std::string> kLanguagePairs{"aa-bb", "aa-cc"};
const std::vector<std::string> kTags{"NOUN", "VERB", "ADJ", "DET", "ADP"};

std::vector<std::string> make_vocab(Rng& rng, std::size_t n, const std::vector<std::string>& syllables) {
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        int k = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < k; ++i) w += syllables[rng.below(syllables.size())];
        if (seen.insert(w).second) out.push_back(w);
    }
    return out;
}

// Splits every word into fixed-width chunks and wraps them with special tokens.
TokenSequence tokenize(const std::vector<std::string>& words, std::size_t width, const std::string& head,
                       std::uint8_t head_flags, bool trailing_eos) {
    TokenSequence seq;
    seq.tokens.push_back({head, {-1, -1}, head_flags});
    std::int32_t offset = 0;
    for (const auto& w : words) {
        for (std::size_t at = 0; at < w.size(); at += width) {
            std::size_t len = std::min(width, w.size() - at);
            seq.tokens.push_back({w.substr(at, len),
                                  {offset + static_cast<std::int32_t>(at), offset + static_cast<std::int32_t>(at + len)},
                                  0});
        }
        offset += static_cast<std::int32_t>(w.size()) + 1;
    }
    if (trailing_eos) seq.tokens.push_back({"</s>", {-1, -1}, static_cast<std::uint8_t>(kSpecial | kEos)});
    return seq;
}

AttentionTensor attention(Rng& rng, int rows, int cols, bool causal) {
    AttentionTensor t{kLayers, kHeads, rows, cols, {}};
    t.data.resize(t.expected_size());
    std::size_t at = 0;
    for (int l = 0; l < kLayers; ++l)
        for (int h = 0; h < kHeads; ++h)
            for (int r = 0; r < rows; ++r) {
                int limit = causal ? r + 1 : cols;
                std::vector<double> w(static_cast<std::size_t>(cols), 0.0);
                double total = 0.0;
                for (int c = 0; c < limit; ++c) total += w[static_cast<std::size_t>(c)] = std::exp(1.5 * rng.normal());
                for (int c = 0; c < cols; ++c) t.data[at++] = static_cast<float>(w[static_cast<std::size_t>(c)] / total);
            }
    return t;
}

TokenLogProbs logprobs(Rng& rng, int count, double scale) {
    TokenLogProbs lp;
    for (int i = 0; i < count; ++i) lp.values.push_back(static_cast<float>(-scale * std::exp(0.8 * rng.normal())));
    return lp;
}

// Groups words 1..n into consecutive segments of two or three words.
std::vector<IndexSet> segments(int n, Rng& rng) {
    std::vector<IndexSet> out;
    int at = 1;
    while (at <= n) {
        int len = std::min(n - at + 1, 2 + static_cast<int>(rng.below(2)));
        if (n - (at + len - 1) == 1) ++len;
        out.push_back(IndexSet::range(at, at + len - 1));
        at += len;
    }
    return out;
}

struct Unit {
    std::string pair_id;
    std::string participant;
    std::string sentence_id;
    std::string tag;
    UnitLevel level;
    Side side;
    IndexSet indices;
    IndexSet aligned;
    FeatureVector features;
};

double zscore(double x, const std::vector<double>& all) {
    double mean = 0, var = 0;
    for (double v : all) mean += v;
    mean /= static_cast<double>(all.size());
    for (double v : all) var += (v - mean) * (v - mean);
    return (x - mean) / std::sqrt(var / static_cast<double>(all.size()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic mini-corpus"};
    std::string out_dir = "data/minicorpus";
    std::uint64_t seed = 20240;
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);

    const fs::path out(out_dir);
    fs::create_directories(out / "tables");
    fs::create_directories(out / "dumps");
    Rng rng(seed, "minicorpus");

    const std::vector<std::string> src_syll{"ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "pe", "du"};
    auto source_vocab = make_vocab(rng, 80, src_syll);
    std::map<std::string, std::vector<std::string>> target_vocab;
    target_vocab["aa-bb"] = make_vocab(rng, 80, {"ba", "do", "gu", "ki", "mo", "ta", "we", "zi"});
    target_vocab["aa-cc"] = make_vocab(rng, 80, {"cha", "fo", "hu", "ja", "lei", "no", "qi", "xu"});
    std::map<std::string, std::string> pos_of;
    for (const auto& w : source_vocab) pos_of[w] = kTags[rng.below(kTags.size())];

    std::vector<std::vector<std::string>> sentence_rows;
    std::vector<Unit> units;
    std::map<std::string, SentencePair> pairs;
    FrequencyTable freq_table;
    std::unordered_map<std::string, double> freq;
    auto add_freq = [&](const std::vector<std::string>& vocab) {
        for (const auto& w : vocab) {
            if (rng.uniform() < 0.1) continue;
            double f = std::round(std::exp(rng.normal(8.0, 2.0)) * 100.0) / 100.0 + 0.01;
            freq[w] = f;
        }
    };
    add_freq(source_vocab);
    for (const auto& lp : kLanguagePairs) add_freq(target_vocab[lp]);
    std::vector<std::string> freq_words;
    for (const auto& [w, f] : freq) freq_words.push_back(w);
    std::sort(freq_words.begin(), freq_words.end());
    std::string freq_text = "# word\tfrequency per billion\n";
    for (const auto& w : freq_words) freq_text += w + "\t" + format_number(freq[w]) + "\n";
    freq_table = FrequencyTable(freq);

    DumpManifest manifest;
    manifest.lm_model = "synthetic-lm";
    manifest.nmt_model = "synthetic-nmt";
    manifest.lm_tokenizer = "chunk3";
    manifest.nmt_tokenizer = "chunk4";
    manifest.layers = kLayers;
    manifest.heads = kHeads;

    int sentence_no = 0;
    for (const auto& lp : kLanguagePairs) {
        // one-to-one dictionary; participants sometimes pick an alternative
        std::map<std::string, std::pair<std::string, std::string>> dict;
        const auto& tv = target_vocab[lp];
        for (std::size_t i = 0; i < source_vocab.size(); ++i)
            dict[source_vocab[i]] = {tv[i], tv[(i * 7 + 3) % tv.size()]};
        for (int s = 0; s < kSentencesPerPair; ++s) {
            char sid[16];
            std::snprintf(sid, sizeof sid, "S%02d", ++sentence_no);
            int m = 6 + static_cast<int>(rng.below(5));
            std::vector<std::string> source;
            std::vector<std::string> tags;
            for (int i = 0; i < m; ++i) {
                source.push_back(source_vocab[rng.below(source_vocab.size())]);
                tags.push_back(pos_of[source.back()]);
            }
            auto source_segments = segments(m, rng);
            for (const auto& participant : kParticipants) {
                std::string pair_id = std::string(sid) + "-" + participant;
                std::vector<std::string> target;
                std::vector<int> target_to_source;
                for (int i = 0; i < m; ++i) {
                    const auto& options = dict[source[static_cast<std::size_t>(i)]];
                    target.push_back(rng.uniform() < 0.3 ? options.second : options.first);
                    target_to_source.push_back(i + 1);
                    if (rng.uniform() < 0.12) {
                        target.push_back(tv[rng.below(tv.size())]);
                        target_to_source.push_back(i + 1);
                    }
                }
                SentencePair sp{pair_id, source, target, sid, lp, tags};
                sentence_rows.push_back({pair_id, sid, lp, join(source, " "), join(target, " "), join(tags, " ")});

                ModelDump d;
                d.pair_id = pair_id;
                d.source_text = join_tokens(source);
                d.target_text = join_tokens(target);
                d.layers = kLayers;
                d.heads = kHeads;
                d.nmt_source = tokenize(source, 4, "__aa__", kSpecial | kBos, true);
                d.nmt_target = tokenize(target, 4, "__" + lp.substr(3) + "__", kSpecial | kBos, true);
                d.lm_source_tokens = tokenize(source, 3, "<s>", kSpecial | kBos, false);
                d.lm_target_tokens = tokenize(target, 3, "<s>", kSpecial | kBos, false);
                const int S = d.nmt_source.size();
                const int T = d.nmt_target.size();
                d.enc_attn = attention(rng, S, S, false);
                d.cross_attn = attention(rng, T, S, false);
                d.dec_attn = attention(rng, T, T, true);
                d.lm_source = logprobs(rng, d.lm_source_tokens.size() - 1, 2.0);
                d.lm_target = logprobs(rng, d.lm_target_tokens.size() - 1, 2.0);
                d.mt_target = logprobs(rng, T - 1, 1.5);
                std::string file = pair_id + ".tdwb";
                write_dump(out / "dumps" / file, d);
                manifest.pairs.push_back({pair_id, file});

                DumpMaps maps = build_maps(d, sp);
                const int n = static_cast<int>(target.size());
                for (int i = 1; i <= m; ++i) {
                    IndexSet aligned;
                    for (int j = 1; j <= n; ++j)
                        if (target_to_source[static_cast<std::size_t>(j - 1)] == i) aligned = aligned.united(IndexSet{j});
                    Unit u{pair_id, participant, sid, tags[static_cast<std::size_t>(i - 1)], UnitLevel::word,
                           Side::source, IndexSet{i}, aligned, {}};
                    u.features = extract_features(d, maps, sp, {Side::source, u.indices}, freq_table);
                    units.push_back(std::move(u));
                }
                for (int j = 1; j <= n; ++j) {
                    int i = target_to_source[static_cast<std::size_t>(j - 1)];
                    Unit u{pair_id, participant, sid, tags[static_cast<std::size_t>(i - 1)], UnitLevel::word,
                           Side::target, IndexSet{j}, IndexSet{i}, {}};
                    u.features = extract_features(d, maps, sp, {Side::target, u.indices}, freq_table);
                    units.push_back(std::move(u));
                }
                for (const auto& seg : source_segments) {
                    IndexSet tseg;
                    for (int j = 1; j <= n; ++j)
                        if (seg.contains(target_to_source[static_cast<std::size_t>(j - 1)])) tseg = tseg.united(IndexSet{j});
                    Unit su{pair_id, participant, sid, "", UnitLevel::segment, Side::source, seg, tseg, {}};
                    su.features = extract_features(d, maps, sp, {Side::source, seg}, freq_table);
                    Unit tu{pair_id, participant, sid, "", UnitLevel::segment, Side::target, tseg, seg, {}};
                    tu.features = extract_features(d, maps, sp, {Side::target, tseg}, freq_table);
                    units.push_back(std::move(su));
                    units.push_back(std::move(tu));
                }
                pairs[pair_id] = sp;
            }
        }
    }
    write_manifest(out / "dumps", manifest);

    // Durations with planted effects, standardized per level and side.
    std::map<std::pair<int, int>, std::map<Feature, std::vector<double>>> pool;
    auto key = [](const Unit& u) { return std::make_pair(static_cast<int>(u.level), static_cast<int>(u.side)); };
    for (const auto& u : units)
        for (auto f : {Feature::s_lm, Feature::s_mt, Feature::length_tokens})
            if (u.features[f]) pool[key(u)][f].push_back(*u.features[f]);
    std::map<std::string, double> lang_effect{{"aa-bb", 0.15}, {"aa-cc", -0.15}};
    std::map<std::string, double> part_effect{{"P01", -0.2}, {"P02", 0.05}, {"P03", 0.15}};

    const std::vector<std::string> header{"Study", "Participant", "PairId", "Side", "Unit", "Aligned",
                                          "STsent", "TTsent", "TrtS", "TrtT", "Dur", "PoS"};
    std::map<UnitLevel, std::vector<std::vector<std::string>>> tables;
    for (const auto& u : units) {
        auto z = [&](Feature f) { return zscore(*u.features[f], pool[key(u)][f]); };
        double base = lang_effect[pairs[u.pair_id].language_pair] + part_effect[u.participant] +
                      0.2 * z(Feature::length_tokens);
        std::string trt_s = "NA", trt_t = "NA", dur = "NA";
        if (u.side == Side::source) {
            trt_s = format_fixed(std::exp(5.8 + base + 0.3 * z(Feature::s_lm) + rng.normal(0.0, 0.5)), 1);
        } else {
            trt_t = format_fixed(std::exp(5.5 + base + 0.1 * z(Feature::s_lm) + rng.normal(0.0, 0.6)), 1);
            dur = format_fixed(std::exp(6.5 + base + 0.6 * z(Feature::s_mt) + rng.normal(0.0, 0.4)), 1);
        }
        tables[u.level].push_back({"SYN", u.participant, u.pair_id, to_string(u.side), u.indices.to_string(),
                                   u.aligned.to_string(), u.sentence_id, u.pair_id, trt_s, trt_t, dur,
                                   u.tag.empty() ? "---" : u.tag});
    }

    // A few rows the ingest filters are expected to catch.
    auto& words = tables[UnitLevel::word];
    words[3][8] = "12.0";
    for (auto& row : words)
        if (row[3] == "target") {
            row[10] = "15.0";
            break;
        }
    words[5][6] = "S01+S02";
    words.push_back({"SYN", "P01", "S99-P01", "target", "1", "1", "S99", "S99-P01", "NA", "300.0", "410.0", "NOUN"});

    write_file(out / "tables" / "sentences.tsv",
               render_tsv({"PairId", "SentenceId", "LangPair", "Source", "Target", "PoS"}, sentence_rows));
    write_file(out / "tables" / "words.tsv", render_tsv(header, tables[UnitLevel::word]));
    write_file(out / "tables" / "segments.tsv", render_tsv(header, tables[UnitLevel::segment]));
    write_file(out / "frequency.tsv", freq_text);
    std::cout << "wrote " << pairs.size() << " sentence pairs, " << units.size() << " units to " << out << "\n";
    return 0;
}
