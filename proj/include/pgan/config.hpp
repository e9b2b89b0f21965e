#pragma once

#include <string>

#include "pgan/data_model.hpp"
#include "pgan/part_proposals.hpp"
#include "pgan/synthgen.hpp"

namespace pgan {

/// Everything a run needs, resolved from the key=value config file plus flag
/// overrides. One root seed drives generation, detector simulation, model
/// init, sampling and augmentation.
struct AppConfig {
    SynthConfig synth;
    TrainConfig train;
    DetectorNoise detector{0.08, 0.05, 1.5, 0};
    double train_frac = 0.5;
    std::string metric = "cosine";
    std::string protocol = "veri";
    int cmc_k = 20;
    int vehicleid_repeats = 10;
};

/// Lines of `key = value`; '#' starts a comment. Unknown keys raise
/// ConfigError naming the key.
AppConfig load_config_file(const std::string& path);
void apply_config_line(AppConfig& cfg, const std::string& key,
                       const std::string& value);

std::string config_to_json_string(const AppConfig& cfg);

} // namespace pgan
