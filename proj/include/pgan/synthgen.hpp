#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgan/data_model.hpp"

namespace pgan {

/// Controlled retrieval benchmark: coarse appearance is shared across
/// identities (num_models base textures), identity lives in small
/// high-contrast glyphs at body-fixed positions, and per-image distractor
/// glyphs plus camera effects supply the nuisance variation.
struct SynthConfig {
    int num_ids = 64;
    int images_per_id = 12;
    int num_models = 4;
    int img_size = 64;
    int glyph_min = 11;
    int glyph_max = 14;
    int num_identity_glyphs = 2;
    int num_distractor_glyphs = 2;
    int num_junk_patches = 9;     // undetected glyph-textured scene clutter
    int num_cameras = 4;
    double brightness_jitter = 0.1;
    double blur_prob = 0.1;
    double occlusion_prob = 0.1;
    double pixel_noise = 0.02;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Sidecar consumed only by tests and the attention analysis: which
/// ground-truth boxes carry identity, and the shared model id per image.
struct SynthMeta {
    struct PerImage {
        int model = 0;
        std::vector<bool> identity_flags; // aligned with the sample's boxes
    };
    std::map<std::string, PerImage> files;

    void save(const std::string& path) const;
    static SynthMeta load(const std::string& path);
};

Dataset generate(const SynthConfig& cfg, SynthMeta* meta = nullptr);

/// Dataset directory: manifest.tsv + images/ + synth_meta.json.
void generate_to_dir(const SynthConfig& cfg, const std::string& dir);

/// Per-box identity flags from the generation metadata; a sample unknown to
/// the metadata raises IngestError.
std::vector<bool> oracle_labels(const ImageSample& sample, const SynthMeta& meta);

} // namespace pgan
