#include "json.hpp"

#include "tdiff/dump.hpp"
#include "tdiff/errors.hpp"
#include "tdiff/text_io.hpp"

namespace tdiff {

using nlohmann::ordered_json;

DumpManifest read_manifest(const std::filesystem::path& dump_dir) {
    const auto path = dump_dir / "manifest.json";
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const ordered_json::exception& e) {
        throw FormatError("malformed dump manifest " + path.string() + ": " + e.what());
    }
    try {
        DumpManifest m;
        if (j.value("format", std::string()) != "TDWB") throw FormatError("manifest format is not TDWB");
        m.format_version = j.at("version").get<int>();
        if (m.format_version != kDumpVersion)
            throw FormatError("unsupported manifest version " + std::to_string(m.format_version));
        m.lm_model = j.at("models").at("lm").get<std::string>();
        m.nmt_model = j.at("models").at("nmt").get<std::string>();
        m.lm_tokenizer = j.at("tokenizers").at("lm").get<std::string>();
        m.nmt_tokenizer = j.at("tokenizers").at("nmt").get<std::string>();
        m.layers = j.at("layers").get<int>();
        m.heads = j.at("heads").get<int>();
        for (const auto& p : j.at("pairs"))
            m.pairs.push_back({p.at("pair_id").get<std::string>(), p.at("file").get<std::string>()});
        if (j.contains("failures"))
            for (const auto& f : j.at("failures"))
                m.failures.push_back({f.at("pair_id").get<std::string>(), f.at("reason").get<std::string>()});
        return m;
    } catch (const ordered_json::exception& e) {
        throw FormatError("dump manifest " + path.string() + " lacks a field: " + e.what());
    }
}

void write_manifest(const std::filesystem::path& dump_dir, const DumpManifest& m) {
    ordered_json j;
    j["format"] = "TDWB";
    j["version"] = m.format_version;
    j["models"] = {{"lm", m.lm_model}, {"nmt", m.nmt_model}};
    j["tokenizers"] = {{"lm", m.lm_tokenizer}, {"nmt", m.nmt_tokenizer}};
    j["layers"] = m.layers;
    j["heads"] = m.heads;
    j["pairs"] = ordered_json::array();
    for (const auto& p : m.pairs) j["pairs"].push_back({{"pair_id", p.pair_id}, {"file", p.file}});
    j["failures"] = ordered_json::array();
    for (const auto& f : m.failures) j["failures"].push_back({{"pair_id", f.pair_id}, {"reason", f.reason}});
    write_file(dump_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace tdiff
