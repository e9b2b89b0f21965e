#include "pgan/config.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

#include "pgan/errors.hpp"

using nlohmann::json;

namespace pgan {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

double to_num(const std::string& key, const std::string& value) {
    double out = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw ConfigError("config: field '" + key + "' has non-numeric value '" +
                          value + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: field '" + key + "' expects a boolean, got '" +
                      value + "'");
}

} // namespace

void apply_config_line(AppConfig& cfg, const std::string& key,
                       const std::string& value) {
    auto num = [&] { return to_num(key, value); };
    auto integer = [&] { return static_cast<int>(to_num(key, value)); };
    auto seed = [&] { return static_cast<std::uint64_t>(to_num(key, value)); };

    if (key == "synth.num_ids") cfg.synth.num_ids = integer();
    else if (key == "synth.images_per_id") cfg.synth.images_per_id = integer();
    else if (key == "synth.num_models") cfg.synth.num_models = integer();
    else if (key == "synth.img_size") cfg.synth.img_size = integer();
    else if (key == "synth.glyph_min") cfg.synth.glyph_min = integer();
    else if (key == "synth.glyph_max") cfg.synth.glyph_max = integer();
    else if (key == "synth.num_identity_glyphs") cfg.synth.num_identity_glyphs = integer();
    else if (key == "synth.num_distractor_glyphs") cfg.synth.num_distractor_glyphs = integer();
    else if (key == "synth.num_cameras") cfg.synth.num_cameras = integer();
    else if (key == "synth.brightness_jitter") cfg.synth.brightness_jitter = num();
    else if (key == "synth.blur_prob") cfg.synth.blur_prob = num();
    else if (key == "synth.occlusion_prob") cfg.synth.occlusion_prob = num();
    else if (key == "synth.pixel_noise") cfg.synth.pixel_noise = num();
    else if (key == "synth.seed") cfg.synth.seed = seed();
    else if (key == "train.d") cfg.train.d = integer();
    else if (key == "train.lambda") cfg.train.lambda = num();
    else if (key == "train.margin") cfg.train.margin = num();
    else if (key == "train.c") cfg.train.backbone_c = integer();
    else if (key == "train.c_prime") cfg.train.c_prime = integer();
    else if (key == "train.p") cfg.train.p = integer();
    else if (key == "train.k") cfg.train.k = integer();
    else if (key == "train.lr0") cfg.train.lr0 = num();
    else if (key == "train.decay_every") cfg.train.decay_every = integer();
    else if (key == "train.decay_factor") cfg.train.decay_factor = num();
    else if (key == "train.epochs") cfg.train.epochs = integer();
    else if (key == "train.erasing_prob") cfg.train.erasing_prob = num();
    else if (key == "train.seed") cfg.train.seed = seed();
    else if (key == "train.remove_last_stride") cfg.train.remove_last_stride = to_bool(key, value);
    else if (key == "train.se_reduction") cfg.train.se_reduction = integer();
    else if (key == "train.weight_decay") cfg.train.weight_decay = num();
    else if (key == "detector.jitter_frac") cfg.detector.jitter_frac = num();
    else if (key == "detector.miss_prob") cfg.detector.miss_prob = num();
    else if (key == "detector.false_pos_rate") cfg.detector.false_pos_rate = num();
    else if (key == "data.train_frac") cfg.train_frac = num();
    else if (key == "eval.metric") cfg.metric = value;
    else if (key == "eval.protocol") cfg.protocol = value;
    else if (key == "eval.cmc_k") cfg.cmc_k = integer();
    else if (key == "eval.vehicleid_repeats") cfg.vehicleid_repeats = integer();
    else throw ConfigError("config: unknown field '" + key + "'");
}

AppConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    AppConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not key = value");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string config_to_json_string(const AppConfig& cfg) {
    json j;
    j["synth"] = {{"num_ids", cfg.synth.num_ids},
                  {"images_per_id", cfg.synth.images_per_id},
                  {"num_models", cfg.synth.num_models},
                  {"img_size", cfg.synth.img_size},
                  {"glyph_min", cfg.synth.glyph_min},
                  {"glyph_max", cfg.synth.glyph_max},
                  {"num_identity_glyphs", cfg.synth.num_identity_glyphs},
                  {"num_distractor_glyphs", cfg.synth.num_distractor_glyphs},
                  {"num_cameras", cfg.synth.num_cameras},
                  {"brightness_jitter", cfg.synth.brightness_jitter},
                  {"blur_prob", cfg.synth.blur_prob},
                  {"occlusion_prob", cfg.synth.occlusion_prob},
                  {"pixel_noise", cfg.synth.pixel_noise},
                  {"seed", cfg.synth.seed}};
    j["train"] = {{"d", cfg.train.d},
                  {"lambda", cfg.train.lambda},
                  {"margin", cfg.train.margin},
                  {"c", cfg.train.backbone_c},
                  {"c_prime", cfg.train.c_prime},
                  {"p", cfg.train.p},
                  {"k", cfg.train.k},
                  {"lr0", cfg.train.lr0},
                  {"decay_every", cfg.train.decay_every},
                  {"decay_factor", cfg.train.decay_factor},
                  {"epochs", cfg.train.epochs},
                  {"erasing_prob", cfg.train.erasing_prob},
                  {"seed", cfg.train.seed},
                  {"remove_last_stride", cfg.train.remove_last_stride},
                  {"se_reduction", cfg.train.se_reduction},
                  {"weight_decay", cfg.train.weight_decay}};
    j["detector"] = {{"jitter_frac", cfg.detector.jitter_frac},
                     {"miss_prob", cfg.detector.miss_prob},
                     {"false_pos_rate", cfg.detector.false_pos_rate}};
    j["data"] = {{"train_frac", cfg.train_frac}};
    j["eval"] = {{"metric", cfg.metric},
                 {"protocol", cfg.protocol},
                 {"cmc_k", cfg.cmc_k},
                 {"vehicleid_repeats", cfg.vehicleid_repeats}};
    return j.dump();
}

} // namespace pgan
