#include "pgan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pgan/errors.hpp"
#include "pgan/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pgan {

namespace {

constexpr int kMaxShift = 4;

const char* kIdentityAttrs[] = {"anusigns", "logo", "hungs", "entrylicense"};
const char* kDistractorAttrs[] = {"windglass", "backmirror", "wheel"};

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

/// Low-frequency base texture on a canvas larger than the image by the
/// camera shift margin; every identity of a model shares it.
Image model_canvas(const SynthConfig& cfg, int model) {
    const int s = cfg.img_size + 2 * kMaxShift;
    Rng rng(derive_seed(cfg.seed, 0x6d6f64656cULL, static_cast<std::uint64_t>(model)));
    double base[3];
    for (auto& b : base) b = rng.uniform(0.3, 0.7);

    const int grid = 6;
    std::vector<double> coarse(static_cast<std::size_t>(grid) * grid * 3);
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx)
            for (int c = 0; c < 3; ++c)
                coarse[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] =
                    clamp01(base[c] + rng.uniform(-0.18, 0.18));

    Image canvas(s, s, 3);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double fy = static_cast<double>(y) / s * (grid - 1);
            const double fx = static_cast<double>(x) / s * (grid - 1);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, grid - 1), x1 = std::min(x0 + 1, grid - 1);
            const double ty = fy - y0, tx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                auto at = [&](int gy, int gx) {
                    return coarse[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c];
                };
                canvas.at(y, x, c) = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) +
                                     ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
            }
        }
    return canvas;
}

enum class GlyphFamily { checker, hstripes, vstripes, rings, dots };

struct GlyphSlot {
    int body_y = 0, body_x = 0, size = 0; // body coordinates, unzoomed
    GlyphFamily family = GlyphFamily::checker;
    std::vector<std::uint8_t> pattern;    // 4x4 bit pattern
    int period = 2;                        // stripe/dot pitch in pattern cells
    double lo = 0.0, hi = 1.0;
    double tint[3] = {1.0, 1.0, 1.0};
};

GlyphSlot random_glyph(Rng& rng, int size) {
    GlyphSlot g;
    g.size = size;
    g.family = static_cast<GlyphFamily>(rng.uniform_int(5));
    g.pattern.resize(16);
    for (auto& b : g.pattern) b = rng.bernoulli(0.5) ? 1 : 0;
    g.period = 2 + static_cast<int>(rng.uniform_int(2));
    g.lo = rng.uniform(0.0, 0.12);
    g.hi = rng.uniform(0.88, 1.0);
    for (auto& t : g.tint) t = rng.uniform(0.75, 1.0);
    return g;
}

/// Identity glyphs: high-contrast bit patterns at body-fixed stratified
/// positions, unique per (identity, slot).
std::vector<GlyphSlot> identity_glyphs(const SynthConfig& cfg, int id) {
    Rng rng(derive_seed(cfg.seed, 0x676c797068ULL, static_cast<std::uint64_t>(id)));
    const int pad = kMaxShift + 2;
    const int usable = cfg.img_size - 2 * pad;
    const int cell_n = static_cast<int>(std::ceil(std::sqrt(cfg.num_identity_glyphs)));
    const int cell = usable / cell_n;

    std::vector<int> cells(static_cast<std::size_t>(cell_n) * cell_n);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    rng.shuffle(cells);

    std::vector<GlyphSlot> out;
    for (int slot = 0; slot < cfg.num_identity_glyphs; ++slot) {
        const int size = cfg.glyph_min +
                         static_cast<int>(rng.uniform_int(cfg.glyph_max - cfg.glyph_min + 1));
        GlyphSlot g = random_glyph(rng, size);
        const int cy = cells[slot] / cell_n, cx = cells[slot] % cell_n;
        const int slack = std::max(1, cell - g.size);
        g.body_y = pad + cy * cell + static_cast<int>(rng.uniform_int(slack));
        g.body_x = pad + cx * cell + static_cast<int>(rng.uniform_int(slack));
        g.body_y = std::min(g.body_y, cfg.img_size - pad - g.size);
        g.body_x = std::min(g.body_x, cfg.img_size - pad - g.size);
        out.push_back(g);
    }
    return out;
}

void paint_bit_glyph(Image& img, int y0, int x0, int size, const GlyphSlot& g) {
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int py = y0 + y, px = x0 + x;
            if (py < 0 || py >= img.h || px < 0 || px >= img.w) continue;
            const int by = y * 4 / size, bx = x * 4 / size;
            bool on = false;
            switch (g.family) {
                case GlyphFamily::checker:
                    on = g.pattern[static_cast<std::size_t>(by) * 4 + bx];
                    break;
                case GlyphFamily::hstripes:
                    on = (y * 4 / size / 1) % g.period == 0;
                    on ^= g.pattern[by] != 0;
                    break;
                case GlyphFamily::vstripes:
                    on = (x * 4 / size / 1) % g.period == 0;
                    on ^= g.pattern[bx] != 0;
                    break;
                case GlyphFamily::rings: {
                    const int ring = std::min({y, x, size - 1 - y, size - 1 - x}) *
                                     4 / std::max(1, size / 2);
                    on = ((ring % 2) == 0) ^ (g.pattern[ring & 3] != 0);
                    break;
                }
                case GlyphFamily::dots:
                    on = (by % g.period == 0) && (bx % g.period == 0);
                    on ^= g.pattern[static_cast<std::size_t>(by) * 4 + bx] != 0;
                    break;
            }
            const double v = on ? g.hi : g.lo;
            for (int c = 0; c < 3; ++c) img.at(py, px, c) = clamp01(v * g.tint[c]);
        }
}

/// Per-image background clutter drawn from the same color statistics as the
/// model textures, so the surroundings cannot be separated trivially.
Image clutter_background(int size, Rng& rng) {
    const int grid = 6;
    std::vector<double> coarse(static_cast<std::size_t>(grid) * grid * 3);
    double base[3];
    for (auto& b : base) b = rng.uniform(0.3, 0.7);
    for (auto& v : coarse) v = 0.0;
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx)
            for (int c = 0; c < 3; ++c)
                coarse[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] =
                    clamp01(base[c] + rng.uniform(-0.25, 0.25));
    Image bg(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double fy = static_cast<double>(y) / size * (grid - 1);
            const double fx = static_cast<double>(x) / size * (grid - 1);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, grid - 1), x1 = std::min(x0 + 1, grid - 1);
            const double ty = fy - y0, tx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                auto at = [&](int gy, int gx) {
                    return coarse[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c];
                };
                bg.at(y, x, c) = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) +
                                 ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
            }
        }
    return bg;
}

/// Distractors are soft radial blobs: glyph-sized but texturally unlike the
/// identity patterns.
void paint_blob(Image& img, int y0, int x0, int size, double amp,
                const double tint[3]) {
    const double r = size * 0.5;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int py = y0 + y, px = x0 + x;
            if (py < 0 || py >= img.h || px < 0 || px >= img.w) continue;
            const double dy = (y - r + 0.5) / r, dx = (x - r + 0.5) / r;
            const double fall = std::max(0.0, 1.0 - (dy * dy + dx * dx));
            for (int c = 0; c < 3; ++c)
                img.at(py, px, c) = clamp01(img.at(py, px, c) + amp * fall * tint[c]);
        }
}

void box_blur(Image& img) {
    Image src = img;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.ch; ++c) {
                double acc = 0.0;
                int cnt = 0;
                for (int oy = -1; oy <= 1; ++oy)
                    for (int ox = -1; ox <= 1; ++ox) {
                        const int py = y + oy, px = x + ox;
                        if (py < 0 || py >= img.h || px < 0 || px >= img.w) continue;
                        acc += src.at(py, px, c);
                        ++cnt;
                    }
                img.at(y, x, c) = acc / cnt;
            }
}

bool rects_overlap(int ay, int ax, int ah, int aw, const PartBox& b,
                   double margin = 0.0) {
    return !(ax + aw <= b.x1 - margin || b.x2 + margin <= ax ||
             ay + ah <= b.y1 - margin || b.y2 + margin <= ay);
}

} // namespace

void SynthConfig::validate() const {
    if (num_ids < 2) throw ConfigError("synth: num_ids must be >= 2");
    if (num_models >= num_ids)
        throw ConfigError("synth: num_models must be smaller than num_ids");
    if (num_models < 1) throw ConfigError("synth: num_models must be >= 1");
    if (images_per_id < 2) throw ConfigError("synth: images_per_id must be >= 2");
    if (img_size < 32) throw ConfigError("synth: img_size must be >= 32");
    if (glyph_min < 4 || glyph_max < glyph_min)
        throw ConfigError("synth: glyph size range invalid");
    if (num_cameras < 1) throw ConfigError("synth: num_cameras must be >= 1");
    if (num_identity_glyphs < 1)
        throw ConfigError("synth: num_identity_glyphs must be >= 1");
    const int cell_n = static_cast<int>(std::ceil(std::sqrt(num_identity_glyphs)));
    const int cell = (img_size - 2 * (4 + 2)) / cell_n; // interior minus shift pad
    if (cell < glyph_max + 1)
        throw ConfigError(
            "synth: num_identity_glyphs does not fit the geometry (reduce "
            "num_identity_glyphs or glyph_max)");
}

Dataset generate(const SynthConfig& cfg, SynthMeta* meta) {
    cfg.validate();
    Dataset ds;
    ds.split = Split::train;
    ds.num_identities = cfg.num_ids;
    if (meta) meta->files.clear();

    std::vector<Image> canvases(cfg.num_models);
    for (int m = 0; m < cfg.num_models; ++m) canvases[m] = model_canvas(cfg, m);

    std::vector<double> cam_gain(cfg.num_cameras);
    for (int c = 0; c < cfg.num_cameras; ++c)
        cam_gain[c] = cfg.num_cameras == 1
                          ? 1.0
                          : 0.82 + 0.36 * c / (cfg.num_cameras - 1);

    for (int id = 0; id < cfg.num_ids; ++id) {
        const int model = id % cfg.num_models;
        const auto glyphs = identity_glyphs(cfg, id);

        for (int im = 0; im < cfg.images_per_id; ++im) {
            Rng rng(derive_seed(cfg.seed, 0x696d67ULL,
                                (static_cast<std::uint64_t>(id) << 20) ^
                                    static_cast<std::uint64_t>(im)));
            const int camera = im % cfg.num_cameras;
            const int dy = static_cast<int>(rng.uniform_int(2 * kMaxShift + 1)) - kMaxShift;
            const int dx = static_cast<int>(rng.uniform_int(2 * kMaxShift + 1)) - kMaxShift;
            // camera distance: the body fills a varying fraction of the frame
            const double zoom = rng.uniform(0.8, 1.0);
            const int body = std::max(16, static_cast<int>(std::lround(cfg.img_size * zoom)));
            const int off_y = static_cast<int>(rng.uniform_int(cfg.img_size - body + 1));
            const int off_x = static_cast<int>(rng.uniform_int(cfg.img_size - body + 1));
            const double scale = static_cast<double>(body) / cfg.img_size;

            ImageSample s;
            s.pixels = clutter_background(cfg.img_size, rng);
            const Image& canvas = canvases[model];
            // nearest-neighbor resample of the shifted canvas crop
            for (int y = 0; y < body; ++y)
                for (int x = 0; x < body; ++x) {
                    const int sy = std::min(cfg.img_size - 1,
                                            static_cast<int>(y / scale));
                    const int sx = std::min(cfg.img_size - 1,
                                            static_cast<int>(x / scale));
                    for (int c = 0; c < 3; ++c)
                        s.pixels.at(off_y + y, off_x + x, c) =
                            canvas.at(sy + kMaxShift + dy, sx + kMaxShift + dx, c);
                }

            std::vector<bool> flags;
            for (std::size_t gi = 0; gi < glyphs.size(); ++gi) {
                const auto& g = glyphs[gi];
                const int size = std::max(3, static_cast<int>(std::lround(g.size * scale)));
                int iy = off_y + static_cast<int>(std::lround((g.body_y - dy) * scale));
                int ix = off_x + static_cast<int>(std::lround((g.body_x - dx) * scale));
                iy = std::clamp(iy, 0, cfg.img_size - size);
                ix = std::clamp(ix, 0, cfg.img_size - size);
                paint_bit_glyph(s.pixels, iy, ix, size, g);
                PartBox b;
                b.x1 = ix;
                b.y1 = iy;
                b.x2 = ix + size;
                b.y2 = iy + size;
                b.confidence = 1.0;
                b.attribute = kIdentityAttrs[gi % 4];
                s.boxes.push_back(b);
                flags.push_back(true);
            }

            for (int di = 0; di < cfg.num_distractor_glyphs; ++di) {
                const int size = std::max(
                    3, static_cast<int>(std::lround(
                           (cfg.glyph_min + static_cast<int>(rng.uniform_int(
                                                cfg.glyph_max - cfg.glyph_min + 1))) *
                           scale)));
                int iy = off_y + static_cast<int>(rng.uniform_int(body - size));
                int ix = off_x + static_cast<int>(rng.uniform_int(body - size));
                for (int attempt = 0; attempt < 30; ++attempt) {
                    bool near_identity = false;
                    for (int gi = 0; gi < cfg.num_identity_glyphs; ++gi)
                        if (rects_overlap(iy, ix, size, size, s.boxes[gi], 3.0))
                            near_identity = true;
                    if (!near_identity) break;
                    iy = off_y + static_cast<int>(rng.uniform_int(body - size));
                    ix = off_x + static_cast<int>(rng.uniform_int(body - size));
                }
                double tint[3];
                for (auto& t : tint) t = rng.uniform(0.5, 1.0);
                const double amp = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.15, 0.3);
                paint_blob(s.pixels, iy, ix, size, amp, tint);
                PartBox b;
                b.x1 = ix;
                b.y1 = iy;
                b.x2 = ix + size;
                b.y2 = iy + size;
                b.confidence = 1.0;
                b.attribute = kDistractorAttrs[di % 3];
                s.boxes.push_back(b);
                flags.push_back(false);
            }

            // glyph-textured junk outside any detected part: global pooling
            // has to average over it, masked pooling never sees it
            for (int ji = 0; ji < cfg.num_junk_patches; ++ji) {
                const int size = cfg.glyph_min + static_cast<int>(rng.uniform_int(
                                                     cfg.glyph_max - cfg.glyph_min + 1));
                for (int attempt = 0; attempt < 50; ++attempt) {
                    const int jy = static_cast<int>(rng.uniform_int(cfg.img_size - size));
                    const int jx = static_cast<int>(rng.uniform_int(cfg.img_size - size));
                    // stand clear of the identity glyphs so their local
                    // receptive fields stay uncontaminated
                    bool near_identity = false;
                    for (int gi = 0; gi < cfg.num_identity_glyphs; ++gi)
                        if (rects_overlap(jy, jx, size, size, s.boxes[gi], 8.0))
                            near_identity = true;
                    if (near_identity) continue;
                    GlyphSlot junk = random_glyph(rng, size);
                    paint_bit_glyph(s.pixels, jy, jx, size, junk);
                    break;
                }
            }

            if (rng.bernoulli(cfg.occlusion_prob)) {
                // one or two striped occluders; across all of them at most one
                // identity glyph may be covered
                const int occluders = 1 + (rng.bernoulli(0.5) ? 1 : 0);
                int covered_total = 0;
                for (int oc = 0; oc < occluders; ++oc) {
                    for (int attempt = 0; attempt < 50; ++attempt) {
                        const int oh = 12 + static_cast<int>(rng.uniform_int(9));
                        const int ow = 12 + static_cast<int>(rng.uniform_int(9));
                        const int oy = static_cast<int>(rng.uniform_int(cfg.img_size - oh));
                        const int ox = static_cast<int>(rng.uniform_int(cfg.img_size - ow));
                        int covered = 0;
                        for (std::size_t gi = 0; gi < glyphs.size(); ++gi)
                            if (rects_overlap(oy, ox, oh, ow, s.boxes[gi])) ++covered;
                        if (covered_total + covered > 1) continue;
                        covered_total += covered;
                        double c1[3], c2[3];
                        for (int c = 0; c < 3; ++c) {
                            c1[c] = rng.uniform(0.1, 0.9);
                            c2[c] = rng.uniform(0.1, 0.9);
                        }
                        const int stripe = 2 + static_cast<int>(rng.uniform_int(3));
                        const bool horizontal = rng.bernoulli(0.5);
                        for (int y = oy; y < oy + oh; ++y)
                            for (int x = ox; x < ox + ow; ++x) {
                                const int phase = (horizontal ? y : x) / stripe % 2;
                                for (int c = 0; c < 3; ++c)
                                    s.pixels.at(y, x, c) = phase ? c1[c] : c2[c];
                            }
                        break;
                    }
                }
            }

            const double gain =
                cam_gain[camera] + rng.uniform(-cfg.brightness_jitter, cfg.brightness_jitter);
            for (auto& px : s.pixels.v) px = clamp01(px * gain);

            if (rng.bernoulli(cfg.blur_prob)) box_blur(s.pixels);

            if (cfg.pixel_noise > 0.0)
                for (auto& px : s.pixels.v)
                    px = clamp01(px + rng.uniform(-cfg.pixel_noise, cfg.pixel_noise));

            // quantize so the in-memory dataset equals its on-disk round trip
            for (auto& px : s.pixels.v)
                px = std::lround(px * 255.0) / 255.0;

            s.identity = id;
            s.source_id = id;
            s.camera = camera;
            char name[64];
            std::snprintf(name, sizeof(name), "images/id%04d_im%02d.ppm", id, im);
            s.file = name;

            if (meta) {
                SynthMeta::PerImage pi;
                pi.model = model;
                pi.identity_flags = flags;
                meta->files[s.file] = pi;
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

void generate_to_dir(const SynthConfig& cfg, const std::string& dir) {
    SynthMeta meta;
    Dataset ds = generate(cfg, &meta);
    save_dataset(dir, ds);
    meta.save((fs::path(dir) / "synth_meta.json").string());
}

void SynthMeta::save(const std::string& path) const {
    json j;
    for (const auto& [file, pi] : files) {
        json flags = json::array();
        for (bool f : pi.identity_flags) flags.push_back(f);
        j[file] = {{"model", pi.model}, {"identity_flags", flags}};
    }
    std::ofstream f(path);
    if (!f) throw IngestError("SynthMeta::save: cannot open " + path);
    f << j.dump(1) << "\n";
}

SynthMeta SynthMeta::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IngestError("SynthMeta::load: cannot open " + path);
    json j = json::parse(f);
    SynthMeta meta;
    for (auto it = j.begin(); it != j.end(); ++it) {
        PerImage pi;
        pi.model = it.value().at("model").get<int>();
        for (const auto& b : it.value().at("identity_flags"))
            pi.identity_flags.push_back(b.get<bool>());
        meta.files[it.key()] = pi;
    }
    return meta;
}

std::vector<bool> oracle_labels(const ImageSample& sample, const SynthMeta& meta) {
    auto it = meta.files.find(sample.file);
    if (it == meta.files.end())
        throw IngestError("oracle_labels: sample '" + sample.file +
                          "' is not part of this synthetic dataset");
    return std::vector<bool>(it->second.identity_flags.begin(),
                             it->second.identity_flags.end());
}

} // namespace pgan
