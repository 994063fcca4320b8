#include "tdiff/features.hpp"

namespace tdiff {

std::string_view feature_name(Feature f) {
    return kFeatureNames[static_cast<std::size_t>(f)];
}

Feature feature_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name) return static_cast<Feature>(i);
    throw ConfigError("unknown feature '" + std::string(name) + "'");
}

double normalize_feature(double raw, double dummy) {
    if (dummy == 0.0) return 0.0;
    return raw / dummy;
}

namespace {

enum class Kind { flow, entropy };

struct FeatureSpec {
    Feature feature;
    const AttentionTensor* tensor;
    IndexSet from;
    IndexSet to;
    Kind kind;
};

template <AttentionMatrix M>
double raw_value(const M& a, const FeatureSpec& spec) {
    return spec.kind == Kind::flow ? flow(a, spec.from, spec.to) : attn_entropy(a, spec.from, spec.to);
}

// Normalize each (layer, head) by the uniform-attention value, then average.
double head_averaged(const FeatureSpec& spec) {
    const AttentionTensor& t = *spec.tensor;
    const double dummy = raw_value(UniformAttention(t.rows, t.cols), spec);
    double sum = 0.0;
    for (int l = 0; l < t.layers; ++l)
        for (int h = 0; h < t.heads; ++h) sum += normalize_feature(raw_value(t.view(l, h), spec), dummy);
    return sum / (static_cast<double>(t.layers) * t.heads);
}

void require_plain_positions(const IndexSet& positions, const TokenSequence& seq, const char* what) {
    if (positions.empty()) throw DomainError(std::string(what) + " segment has no subwords");
    if (positions.max() > seq.size())
        throw DomainError(std::string(what) + " segment position outside the sequence");
    for (int p : positions)
        if (seq.at(p).special())
            throw DomainError(std::string(what) + " segment contains special token at " + std::to_string(p));
}

}  // namespace

FeatureVector source_feature_set(const ModelDump& dump, const IndexSet& u) {
    require_plain_positions(u, dump.nmt_source, "source");
    const IndexSet specials = dump.nmt_source.special();
    const IndexSet x = dump.nmt_source.non_special();
    const IndexSet context = complement_source(u, dump.source_length()).without(specials);
    const IndexSet eos = dump.nmt_source.eos();
    const IndexSet y = dump.nmt_target.non_special();

    const FeatureSpec specs[] = {
        {Feature::f_e_uu, &dump.enc_attn, u, u, Kind::flow},
        {Feature::f_e_u_ctx, &dump.enc_attn, u, context, Kind::flow},
        {Feature::f_e_u_eos, &dump.enc_attn, u, eos, Kind::flow},
        {Feature::f_e_ctx_u, &dump.enc_attn, context, u, Kind::flow},
        {Feature::H_e_u_x, &dump.enc_attn, u, x, Kind::entropy},
        {Feature::f_c_y_u, &dump.cross_attn, y, u, Kind::flow},
    };
    FeatureVector out;
    for (const auto& spec : specs) out[spec.feature] = head_averaged(spec);
    return out;
}

FeatureVector target_feature_set(const ModelDump& dump, const IndexSet& v) {
    require_plain_positions(v, dump.nmt_target, "target");
    const IndexSet target_specials = dump.nmt_target.special();
    const IndexSet eos = dump.nmt_source.eos();
    const IndexSet x = dump.nmt_source.non_special();
    const IndexSet preceding = preceding_context(v).without(target_specials);
    const IndexSet prefix = prefix_through(v).without(target_specials);

    const FeatureSpec specs[] = {
        {Feature::f_c_v_eos, &dump.cross_attn, v, eos, Kind::flow},
        {Feature::H_c_v_x, &dump.cross_attn, v, x, Kind::entropy},
        {Feature::f_d_vv, &dump.dec_attn, v, v, Kind::flow},
        {Feature::f_d_v_ctx, &dump.dec_attn, v, preceding, Kind::flow},
        {Feature::H_d_v_prefix, &dump.dec_attn, v, prefix, Kind::entropy},
    };
    FeatureVector out;
    for (const auto& spec : specs) out[spec.feature] = head_averaged(spec);
    return out;
}

DumpMaps build_maps(const ModelDump& dump, const SentencePair& sentence) {
    if (dump.pair_id != sentence.pair_id)
        throw MappingError("dump " + dump.pair_id + " does not belong to pair " + sentence.pair_id);
    if (dump.source_text != join_tokens(sentence.source_tokens))
        throw MappingError("dump " + dump.pair_id + " source text differs from the annotated tokens");
    if (dump.target_text != join_tokens(sentence.target_tokens))
        throw MappingError("dump " + dump.pair_id + " target text differs from the annotated tokens");
    auto tag = [&](const char* which, auto&& fn) {
        try {
            return fn();
        } catch (const MappingError& e) {
            throw MappingError("pair " + dump.pair_id + " " + which + ": " + e.what(), e.words());
        }
    };
    DumpMaps maps;
    maps.nmt_source = tag("nmt source", [&] { return map_subwords(sentence.source_tokens, dump.nmt_source); });
    maps.nmt_target = tag("nmt target", [&] { return map_subwords(sentence.target_tokens, dump.nmt_target); });
    maps.lm_source = tag("lm source", [&] { return map_subwords(sentence.source_tokens, dump.lm_source_tokens); });
    maps.lm_target = tag("lm target", [&] { return map_subwords(sentence.target_tokens, dump.lm_target_tokens); });
    return maps;
}

FeatureVector source_feature_set(const ModelDump& dump, const SegmentRef& u, const DumpMaps& maps) {
    if (u.side != Side::source) throw DomainError("source features need a source segment");
    return source_feature_set(dump, segment_subword_indices(u, maps.nmt_source));
}

FeatureVector target_feature_set(const ModelDump& dump, const SegmentRef& v, const DumpMaps& maps) {
    if (v.side != Side::target) throw DomainError("target features need a target segment");
    return target_feature_set(dump, segment_subword_indices(v, maps.nmt_target));
}

FeatureVector extract_features(const ModelDump& dump, const DumpMaps& maps, const SentencePair& sentence,
                               const SegmentRef& unit, const FrequencyTable& freq,
                               std::vector<std::string>* oov_words) {
    unit.validate(sentence.length(unit.side));
    FeatureVector out;
    IndexSet nmt_positions;
    if (unit.side == Side::source) {
        nmt_positions = segment_subword_indices(unit, maps.nmt_source);
        out = source_feature_set(dump, nmt_positions);
        out[Feature::s_lm] = lm_surprisal(dump.lm_source, segment_subword_indices(unit, maps.lm_source));
    } else {
        nmt_positions = segment_subword_indices(unit, maps.nmt_target);
        out = target_feature_set(dump, nmt_positions);
        out[Feature::s_lm] = lm_surprisal(dump.lm_target, segment_subword_indices(unit, maps.lm_target));
        out[Feature::s_mt] = mt_surprisal(dump.mt_target, nmt_positions, Side::target);
    }
    ControlValues c = control_features(unit, sentence, freq, static_cast<int>(nmt_positions.size()));
    out[Feature::length_tokens] = c.length_tokens;
    out[Feature::mean_log_freq] = c.mean_log_freq;
    out[Feature::mean_pos_quantile] = c.mean_pos_quantile;
    if (oov_words) *oov_words = std::move(c.oov_words);
    return out;
}

}  // namespace tdiff
