#include "pgan/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "pgan/errors.hpp"
#include "pgan/training.hpp"

using nlohmann::json;

namespace pgan {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

json config_to_json(const ModelConfig& mc) {
    return json{{"variant", variant_name(mc.variant)},
                {"d", mc.d},
                {"backbone_channels", mc.backbone.channels},
                {"backbone_in_channels", mc.backbone.in_channels},
                {"remove_last_stride", mc.backbone.remove_last_stride},
                {"c_prime", mc.c_prime},
                {"se_reduction", mc.se_reduction},
                {"num_classes", mc.num_classes},
                {"margin", mc.margin},
                {"lambda", mc.lambda},
                {"img_h", mc.img_h},
                {"img_w", mc.img_w},
                {"img_ch", mc.img_ch}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig mc;
    mc.variant = parse_variant(j.at("variant").get<std::string>());
    mc.d = j.at("d").get<int>();
    mc.backbone.channels = j.at("backbone_channels").get<std::vector<int>>();
    mc.backbone.in_channels = j.at("backbone_in_channels").get<int>();
    mc.backbone.remove_last_stride = j.at("remove_last_stride").get<bool>();
    mc.c_prime = j.at("c_prime").get<int>();
    mc.se_reduction = j.at("se_reduction").get<int>();
    mc.num_classes = j.at("num_classes").get<int>();
    mc.margin = j.at("margin").get<double>();
    mc.lambda = j.at("lambda").get<double>();
    mc.img_h = j.at("img_h").get<int>();
    mc.img_w = j.at("img_w").get<int>();
    mc.img_ch = j.at("img_ch").get<int>();
    return mc;
}

void write_f32(std::ofstream& f, const std::vector<double>& v) {
    std::vector<float> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32(std::ifstream& f, std::vector<double>& v, std::size_t count) {
    std::vector<float> buf(count);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != count * sizeof(float))
        throw IngestError("checkpoint: truncated tensor data");
    v.resize(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<double>(buf[i]);
}

json read_header(std::ifstream& f, const std::string& path) {
    char magic[8];
    f.read(magic, 8);
    if (f.gcount() != 8 || std::string(magic, 8) != std::string(kMagic, 8))
        throw IngestError("checkpoint: bad magic in " + path);
    std::uint32_t version = 0;
    std::uint64_t json_len = 0;
    f.read(reinterpret_cast<char*>(&version), sizeof(version));
    f.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
    if (version != 1) throw IngestError("checkpoint: unsupported version");
    std::string text(json_len, '\0');
    f.read(text.data(), static_cast<std::streamsize>(json_len));
    return json::parse(text);
}

} // namespace

void save_checkpoint(const std::string& path, PganModel& model,
                     const CheckpointMeta& meta, const Adam* adam) {
    auto entries = model.state_entries();

    json header;
    header["epoch"] = meta.epoch;
    header["seed"] = meta.seed;
    header["variant"] = variant_name(model.config.variant);
    header["config"] = config_to_json(model.config);
    json jentries = json::array();
    for (const auto& [name, vec] : entries)
        jentries.push_back({{"name", name}, {"count", vec->size()}});
    header["entries"] = jentries;
    header["adam"] = adam != nullptr;
    if (adam) header["adam_t"] = adam->t;

    const std::string text = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IngestError("checkpoint: cannot open " + path + " for writing");
    f.write(kMagic, 8);
    const std::uint32_t version = 1;
    const std::uint64_t json_len = text.size();
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    f.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
    f.write(text.data(), static_cast<std::streamsize>(text.size()));

    for (const auto& [name, vec] : entries) write_f32(f, *vec);
    if (adam) {
        for (const auto& m : adam->m) write_f32(f, m);
        for (const auto& v : adam->v) write_f32(f, v);
    }
}

CheckpointMeta load_checkpoint(const std::string& path, PganModel& model,
                               Adam* adam) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("checkpoint: cannot open " + path);
    json header = read_header(f, path);

    CheckpointMeta meta;
    meta.epoch = header.at("epoch").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.variant = header.at("variant").get<std::string>();
    meta.config = config_from_json(header.at("config"));

    auto entries = model.state_entries();
    const auto& jentries = header.at("entries");
    if (jentries.size() != entries.size())
        throw IngestError("checkpoint: entry count mismatch (model config differs)");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string name = jentries[i].at("name").get<std::string>();
        const std::size_t count = jentries[i].at("count").get<std::size_t>();
        if (name != entries[i].first || count != entries[i].second->size())
            throw IngestError("checkpoint: entry '" + name +
                              "' does not match the model layout");
        read_f32(f, *entries[i].second, count);
    }
    model.mark_statistics_ready();

    if (adam && header.value("adam", false)) {
        adam->t = header.value("adam_t", 0L);
        for (auto& m : adam->m) read_f32(f, m, m.size());
        for (auto& v : adam->v) read_f32(f, v, v.size());
    }
    return meta;
}

CheckpointMeta load_model(const std::string& path, PganModel& model) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("checkpoint: cannot open " + path);
    json header = read_header(f, path);
    ModelConfig mc = config_from_json(header.at("config"));
    model = PganModel(mc, header.at("seed").get<std::uint64_t>());
    f.close();
    return load_checkpoint(path, model, nullptr);
}

std::uint64_t file_fnv1a(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("file_fnv1a: cannot open " + path);
    std::uint64_t hash = 1469598103934665603ULL;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
        if (f.eof()) break;
    }
    return hash;
}

void export_embeddings(const std::string& path_prefix, const Mat& emb,
                       const std::string& role, std::uint64_t checkpoint_hash) {
    {
        std::ofstream f(path_prefix + ".f32", std::ios::binary);
        if (!f) throw IngestError("export_embeddings: cannot open " + path_prefix);
        std::vector<float> buf(emb.v.size());
        for (std::size_t i = 0; i < emb.v.size(); ++i)
            buf[i] = static_cast<float>(emb.v[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    json side{{"count", emb.rows},
              {"dimension", emb.cols},
              {"role", role},
              {"checkpoint_hash", checkpoint_hash}};
    std::ofstream f(path_prefix + ".json");
    f << side.dump(2) << "\n";
}

Mat import_embeddings(const std::string& path_prefix) {
    std::ifstream side(path_prefix + ".json");
    if (!side) throw IngestError("import_embeddings: missing sidecar for " + path_prefix);
    json j = json::parse(side);
    Mat emb(j.at("count").get<int>(), j.at("dimension").get<int>());
    std::ifstream f(path_prefix + ".f32", std::ios::binary);
    if (!f) throw IngestError("import_embeddings: missing blob for " + path_prefix);
    std::vector<float> buf(emb.v.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
        throw IngestError("import_embeddings: truncated blob for " + path_prefix);
    for (std::size_t i = 0; i < buf.size(); ++i) emb.v[i] = buf[i];
    return emb;
}

} // namespace pgan
