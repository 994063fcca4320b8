#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tdiff/dump.hpp"
#include "tdiff/errors.hpp"

static_assert(std::endian::native == std::endian::little, "dump I/O assumes a little-endian host");

namespace tdiff {

namespace {

class Cursor {
public:
    explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const std::string& what) const {
        if (remaining() < n)
            throw CorruptionError("truncated " + what + ": need " + std::to_string(n) + " bytes, " +
                                  std::to_string(remaining()) + " left");
    }

    template <class T>
    T read(const std::string& what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::vector<float> floats(std::size_t count, const std::string& what) {
        need(count * sizeof(float), what);
        std::vector<float> out(count);
        std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
        pos_ += count * sizeof(float);
        return out;
    }

    std::string string(const std::string& what) {
        auto len = read<std::uint32_t>(what + " length");
        need(len, what);
        std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return out;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

class Writer {
public:
    template <class T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out.insert(out.end(), p, p + sizeof(T));
    }
    void floats(const std::vector<float>& values) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        out.insert(out.end(), p, p + values.size() * sizeof(float));
    }
    void string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t> out;
};

AttentionTensor read_tensor(Cursor& in, const char* name, int layers, int heads, int rows, int cols) {
    AttentionTensor t{layers, heads, rows, cols, {}};
    t.data = in.floats(t.expected_size(), std::string("tensor ") + name);
    for (float v : t.data)
        if (!std::isfinite(v) || v < -1e-6f)
            throw CorruptionError(std::string("tensor ") + name + " holds an invalid attention weight");
    return t;
}

TokenLogProbs read_logprobs(Cursor& in, const char* name) {
    auto n = in.read<std::uint32_t>(std::string("tensor ") + name + " length");
    TokenLogProbs lp;
    lp.values = in.floats(n, std::string("tensor ") + name);
    for (float v : lp.values)
        if (!std::isfinite(v) || v > 1e-6f)
            throw CorruptionError(std::string("tensor ") + name + " holds a log-probability above 0");
    return lp;
}

TokenSequence read_sequence(Cursor& in, const char* name, std::size_t expected) {
    auto count = in.read<std::uint32_t>(std::string("token records ") + name);
    if (count != expected)
        throw CorruptionError(std::string("token records ") + name + ": " + std::to_string(count) +
                              " tokens, expected " + std::to_string(expected));
    TokenSequence seq;
    seq.tokens.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TokenRecord tok;
        const std::string what = std::string("token records ") + name;
        tok.span.begin = in.read<std::int32_t>(what);
        tok.span.end = in.read<std::int32_t>(what);
        tok.flags = in.read<std::uint8_t>(what);
        tok.text = in.string(what);
        if (!tok.special() && (tok.span.begin < 0 || tok.span.end < tok.span.begin))
            throw CorruptionError(what + ": token " + std::to_string(i + 1) + " has an invalid span");
        seq.tokens.push_back(std::move(tok));
    }
    return seq;
}

void write_sequence(Writer& w, const TokenSequence& seq) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(seq.tokens.size()));
    for (const auto& tok : seq.tokens) {
        w.put<std::int32_t>(tok.span.begin);
        w.put<std::int32_t>(tok.span.end);
        w.put<std::uint8_t>(tok.flags);
        w.string(tok.text);
    }
}

void check_fits_u16(int value, const char* what) {
    if (value < 0 || value > 0xFFFF) throw ContractError(std::string(what) + " does not fit the header");
}

void check_row_sums(const AttentionTensor& t, const char* name, std::vector<DumpWarning>& out) {
    for (int l = 0; l < t.layers; ++l)
        for (int h = 0; h < t.heads; ++h) {
            auto view = t.view(l, h);
            for (int r = 1; r <= t.rows; ++r) {
                double sum = 0.0;
                for (int c = 1; c <= t.cols; ++c) sum += view(r, c);
                if (std::abs(sum - 1.0) > kRowSumTolerance)
                    out.push_back({name, l, h, r, sum,
                                   std::string(name) + " layer " + std::to_string(l) + " head " +
                                       std::to_string(h) + " row " + std::to_string(r) +
                                       " sums to " + std::to_string(sum)});
            }
        }
}

}  // namespace

IndexSet TokenSequence::non_special() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (!tokens[i].special()) out.push_back(static_cast<int>(i) + 1);
    return IndexSet(std::move(out));
}

IndexSet TokenSequence::special() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].special()) out.push_back(static_cast<int>(i) + 1);
    return IndexSet(std::move(out));
}

IndexSet TokenSequence::eos() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].eos()) out.push_back(static_cast<int>(i) + 1);
    return IndexSet(std::move(out));
}

std::vector<CharSpan> TokenSequence::spans() const {
    std::vector<CharSpan> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.span);
    return out;
}

std::vector<bool> TokenSequence::special_mask() const {
    std::vector<bool> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.special());
    return out;
}

double TokenLogProbs::at_position(int position) const {
    if (position < 2 || position - 2 >= size())
        throw DomainError("no log-probability for token position " + std::to_string(position));
    return values[static_cast<std::size_t>(position - 2)];
}

AttentionView AttentionTensor::view(int layer, int head) const {
    if (layer < 0 || layer >= layers || head < 0 || head >= heads)
        throw DomainError("attention layer/head out of range");
    const std::size_t block = static_cast<std::size_t>(rows) * cols;
    const std::size_t offset = (static_cast<std::size_t>(layer) * heads + head) * block;
    return AttentionView(std::span<const float>(data).subspan(offset, block), rows, cols);
}

std::vector<DumpWarning> check_row_sums(const ModelDump& dump) {
    std::vector<DumpWarning> out;
    check_row_sums(dump.enc_attn, "enc_attn", out);
    check_row_sums(dump.cross_attn, "cross_attn", out);
    check_row_sums(dump.dec_attn, "dec_attn", out);
    return out;
}

ModelDump parse_dump(std::span<const std::uint8_t> bytes, std::vector<DumpWarning>* warnings) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kDumpMagic, 4) != 0)
        throw FormatError("not a TDWB dump (bad magic)");
    Cursor in(bytes);
    in.read<std::uint32_t>("magic");
    auto version = in.read<std::uint16_t>("header");
    if (version != kDumpVersion)
        throw FormatError("unsupported dump version " + std::to_string(version) + " (expected " +
                          std::to_string(kDumpVersion) + ")");
    ModelDump d;
    d.layers = in.read<std::uint16_t>("header");
    d.heads = in.read<std::uint16_t>("header");
    const int S = in.read<std::uint16_t>("header");
    const int T = in.read<std::uint16_t>("header");
    in.read<std::uint16_t>("header");
    if (d.layers == 0 || d.heads == 0 || S == 0 || T == 0)
        throw CorruptionError("header declares an empty dimension");

    d.enc_attn = read_tensor(in, "enc_attn", d.layers, d.heads, S, S);
    d.cross_attn = read_tensor(in, "cross_attn", d.layers, d.heads, T, S);
    d.dec_attn = read_tensor(in, "dec_attn", d.layers, d.heads, T, T);
    d.lm_source = read_logprobs(in, "lm_source");
    d.lm_target = read_logprobs(in, "lm_target");
    d.mt_target = read_logprobs(in, "mt_target");
    if (d.mt_target.size() != T - 1)
        throw CorruptionError("tensor mt_target has " + std::to_string(d.mt_target.size()) +
                              " entries, expected " + std::to_string(T - 1));

    d.pair_id = in.string("pair id");
    d.source_text = in.string("source text");
    d.target_text = in.string("target text");
    d.nmt_source = read_sequence(in, "nmt_source", static_cast<std::size_t>(S));
    d.nmt_target = read_sequence(in, "nmt_target", static_cast<std::size_t>(T));
    d.lm_source_tokens = read_sequence(in, "lm_source", d.lm_source.values.size() + 1);
    d.lm_target_tokens = read_sequence(in, "lm_target", d.lm_target.values.size() + 1);
    if (in.remaining() != 0)
        throw CorruptionError(std::to_string(in.remaining()) + " trailing bytes after token records");

    if (warnings) *warnings = check_row_sums(d);
    return d;
}

ModelDump read_dump(const std::filesystem::path& path, std::vector<DumpWarning>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dump " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_dump(bytes, warnings);
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.filename().string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.filename().string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_dump(const ModelDump& d) {
    const int S = d.nmt_source.size();
    const int T = d.nmt_target.size();
    check_fits_u16(d.layers, "layer count");
    check_fits_u16(d.heads, "head count");
    check_fits_u16(S, "source length");
    check_fits_u16(T, "target length");
    auto check_shape = [&](const AttentionTensor& t, int rows, int cols, const char* name) {
        if (t.layers != d.layers || t.heads != d.heads || t.rows != rows || t.cols != cols ||
            t.data.size() != t.expected_size())
            throw ContractError(std::string("tensor ") + name + " shape is inconsistent");
    };
    check_shape(d.enc_attn, S, S, "enc_attn");
    check_shape(d.cross_attn, T, S, "cross_attn");
    check_shape(d.dec_attn, T, T, "dec_attn");
    if (d.mt_target.size() != T - 1 || d.lm_source.size() + 1 != d.lm_source_tokens.size() ||
        d.lm_target.size() + 1 != d.lm_target_tokens.size())
        throw ContractError("log-probability lengths do not match token sequences");

    Writer w;
    w.out.insert(w.out.end(), kDumpMagic, kDumpMagic + 4);
    w.put<std::uint16_t>(kDumpVersion);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(d.layers));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(d.heads));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(S));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(T));
    w.put<std::uint16_t>(0);
    w.floats(d.enc_attn.data);
    w.floats(d.cross_attn.data);
    w.floats(d.dec_attn.data);
    for (const auto* lp : {&d.lm_source, &d.lm_target, &d.mt_target}) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(lp->values.size()));
        w.floats(lp->values);
    }
    w.string(d.pair_id);
    w.string(d.source_text);
    w.string(d.target_text);
    write_sequence(w, d.nmt_source);
    write_sequence(w, d.nmt_target);
    write_sequence(w, d.lm_source_tokens);
    write_sequence(w, d.lm_target_tokens);
    return std::move(w.out);
}

void write_dump(const std::filesystem::path& path, const ModelDump& dump) {
    auto bytes = encode_dump(dump);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write dump " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace tdiff
