#include "pgan/part_proposals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "pgan/errors.hpp"
#include "pgan/rng.hpp"

namespace pgan {

PartMask::PartMask(int h_, int w_, std::vector<std::uint8_t> grid_)
    : h(h_), w(w_), grid(std::move(grid_)) {
    if (static_cast<int>(grid.size()) != h * w)
        throw ShapeError("PartMask: grid size does not match geometry");
    area = 0;
    for (auto g : grid) {
        if (g != 0 && g != 1) throw ShapeError("PartMask: entries must be 0 or 1");
        area += g;
    }
    if (area < 1) throw ShapeError("PartMask: area must be >= 1");
}

PartMask complement_mask(const PartMask& m) {
    std::vector<std::uint8_t> inv(m.grid.size());
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = m.grid[i] ? 0 : 1;
    return PartMask(m.h, m.w, std::move(inv));
}

std::vector<PartBox> simulate_detector(const ImageSample& sample,
                                       const DetectorNoise& noise) {
    Rng rng(derive_seed(noise.seed, 0xde7ec7ULL));
    std::vector<PartBox> out;
    const double img_w = sample.pixels.w, img_h = sample.pixels.h;

    for (const auto& gt : sample.boxes) {
        if (rng.bernoulli(noise.miss_prob)) continue;
        PartBox b = gt;
        if (noise.jitter_frac > 0.0) {
            const double jx = noise.jitter_frac * gt.width();
            const double jy = noise.jitter_frac * gt.height();
            b.x1 += rng.uniform(-jx, jx);
            b.x2 += rng.uniform(-jx, jx);
            b.y1 += rng.uniform(-jy, jy);
            b.y2 += rng.uniform(-jy, jy);
            if (b.x1 > b.x2) std::swap(b.x1, b.x2);
            if (b.y1 > b.y2) std::swap(b.y1, b.y2);
            b.x1 = std::clamp(b.x1, 0.0, img_w - 1.0);
            b.x2 = std::clamp(b.x2, b.x1 + 1.0, img_w);
            b.y1 = std::clamp(b.y1, 0.0, img_h - 1.0);
            b.y2 = std::clamp(b.y2, b.y1 + 1.0, img_h);
        }
        b.confidence = rng.uniform(0.5, 1.0);
        out.push_back(b);
    }

    const int spurious = rng.poisson(noise.false_pos_rate);
    for (int i = 0; i < spurious; ++i) {
        PartBox b;
        const double bw = rng.uniform(0.08, 0.3) * img_w;
        const double bh = rng.uniform(0.08, 0.3) * img_h;
        b.x1 = rng.uniform(0.0, img_w - bw);
        b.y1 = rng.uniform(0.0, img_h - bh);
        b.x2 = b.x1 + bw;
        b.y2 = b.y1 + bh;
        b.confidence = rng.uniform(0.1, 0.6);
        out.push_back(b);
    }
    return out;
}

std::vector<PartBox> select_top_d(const std::vector<PartBox>& detections, int d,
                                  int img_h, int img_w) {
    if (d < 1) throw ConfigError("select_top_d: d must be >= 1");

    if (detections.empty()) {
        PartBox full;
        full.x1 = 0;
        full.y1 = 0;
        full.x2 = img_w;
        full.y2 = img_h;
        full.confidence = 0.0;
        return std::vector<PartBox>(d, full);
    }

    std::vector<PartBox> sorted = detections;
    std::sort(sorted.begin(), sorted.end(), [](const PartBox& a, const PartBox& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.x1 != b.x1) return a.x1 < b.x1;
        if (a.y1 != b.y1) return a.y1 < b.y1;
        if (a.x2 != b.x2) return a.x2 < b.x2;
        return a.y2 < b.y2;
    });

    std::vector<PartBox> out;
    out.reserve(d);
    const int avail = static_cast<int>(sorted.size());
    for (int i = 0; i < d; ++i) out.push_back(sorted[i % avail]);
    if (avail > d) out.resize(d);
    return out;
}

PartMask rasterize_mask(const PartBox& box, int img_h, int img_w, int feat_h,
                        int feat_w) {
    const double sy = static_cast<double>(feat_h) / img_h;
    const double sx = static_cast<double>(feat_w) / img_w;

    int y0 = static_cast<int>(std::floor(box.y1 * sy));
    int y1 = static_cast<int>(std::ceil(box.y2 * sy));
    int x0 = static_cast<int>(std::floor(box.x1 * sx));
    int x1 = static_cast<int>(std::ceil(box.x2 * sx));
    y0 = std::clamp(y0, 0, feat_h);
    y1 = std::clamp(y1, 0, feat_h);
    x0 = std::clamp(x0, 0, feat_w);
    x1 = std::clamp(x1, 0, feat_w);

    std::vector<std::uint8_t> grid(static_cast<std::size_t>(feat_h) * feat_w, 0);
    if (y0 < y1 && x0 < x1) {
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                grid[static_cast<std::size_t>(y) * feat_w + x] = 1;
    } else {
        // degenerate after rounding/clamping: one cell at the box center
        const int cy = std::clamp(
            static_cast<int>(std::floor((box.y1 + box.y2) * 0.5 * sy)), 0, feat_h - 1);
        const int cx = std::clamp(
            static_cast<int>(std::floor((box.x1 + box.x2) * 0.5 * sx)), 0, feat_w - 1);
        grid[static_cast<std::size_t>(cy) * feat_w + cx] = 1;
    }
    return PartMask(feat_h, feat_w, std::move(grid));
}

FeatureMap apply_mask(const FeatureMap& fg, const PartMask& m) {
    if (fg.h != m.h || fg.w != m.w)
        throw ShapeError("apply_mask: mask geometry does not match feature map");
    FeatureMap out(fg.h, fg.w, fg.c, fg.src_h, fg.src_w);
    for (int y = 0; y < fg.h; ++y)
        for (int x = 0; x < fg.w; ++x) {
            const double mv = m.at(y, x);
            const std::size_t off = (static_cast<std::size_t>(y) * fg.w + x) * fg.c;
            for (int c = 0; c < fg.c; ++c) out.v[off + c] = mv * fg.v[off + c];
        }
    return out;
}

ProposalSet make_proposals(const ImageSample& sample, const DetectorNoise& noise,
                           int d, int feat_h, int feat_w) {
    ProposalSet ps;
    ps.boxes = select_top_d(simulate_detector(sample, noise), d, sample.pixels.h,
                            sample.pixels.w);
    ps.masks.reserve(ps.boxes.size());
    for (const auto& b : ps.boxes)
        ps.masks.push_back(
            rasterize_mask(b, sample.pixels.h, sample.pixels.w, feat_h, feat_w));
    return ps;
}

std::vector<PartMask> grid_masks(int feat_h, int feat_w) {
    std::vector<PartMask> out;
    out.reserve(static_cast<std::size_t>(feat_h) * feat_w);
    for (int y = 0; y < feat_h; ++y)
        for (int x = 0; x < feat_w; ++x) {
            std::vector<std::uint8_t> grid(static_cast<std::size_t>(feat_h) * feat_w, 0);
            grid[static_cast<std::size_t>(y) * feat_w + x] = 1;
            out.emplace_back(feat_h, feat_w, std::move(grid));
        }
    return out;
}

namespace {
std::string fmt_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}
} // namespace

void write_proposal_cache(const std::string& path,
                          const std::map<std::string, std::vector<PartBox>>& boxes) {
    std::ofstream f(path);
    if (!f) throw IngestError("write_proposal_cache: cannot open " + path);
    for (const auto& [file, bs] : boxes) {
        f << file << "\t";
        for (std::size_t i = 0; i < bs.size(); ++i) {
            const auto& b = bs[i];
            if (i) f << ";";
            f << fmt_double(b.x1) << "," << fmt_double(b.y1) << ","
              << fmt_double(b.x2) << "," << fmt_double(b.y2) << ","
              << fmt_double(b.confidence);
            if (b.attribute) f << "," << *b.attribute;
        }
        f << "\n";
    }
}

std::map<std::string, std::vector<PartBox>> read_proposal_cache(
    const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IngestError("read_proposal_cache: cannot open " + path);
    std::map<std::string, std::vector<PartBox>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw IngestError("proposal cache line " + std::to_string(lineno) +
                              " lacks a tab separator");
        const std::string file = line.substr(0, tab);
        const std::string rest = line.substr(tab + 1);
        std::vector<PartBox> bs;
        if (!rest.empty()) {
            std::string tok;
            for (std::size_t i = 0; i <= rest.size(); ++i) {
                if (i == rest.size() || rest[i] == ';') {
                    std::vector<std::string> fields;
                    std::string cur;
                    for (char ch : tok) {
                        if (ch == ',') {
                            fields.push_back(cur);
                            cur.clear();
                        } else {
                            cur.push_back(ch);
                        }
                    }
                    fields.push_back(cur);
                    if (fields.size() != 5 && fields.size() != 6)
                        throw IngestError("bad box in proposal cache line " +
                                          std::to_string(lineno));
                    PartBox b;
                    auto num = [&](const std::string& t) {
                        double v = 0;
                        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
                        if (res.ec != std::errc())
                            throw IngestError("bad number in proposal cache line " +
                                              std::to_string(lineno));
                        return v;
                    };
                    b.x1 = num(fields[0]);
                    b.y1 = num(fields[1]);
                    b.x2 = num(fields[2]);
                    b.y2 = num(fields[3]);
                    b.confidence = num(fields[4]);
                    if (fields.size() == 6) b.attribute = fields[5];
                    bs.push_back(b);
                    tok.clear();
                } else {
                    tok.push_back(rest[i]);
                }
            }
        }
        out[file] = std::move(bs);
    }
    return out;
}

} // namespace pgan
