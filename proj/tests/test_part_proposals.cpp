#include <doctest.h>

#include <cmath>

#include "pgan/part_proposals.hpp"
#include "pgan/rng.hpp"

using namespace pgan;

namespace {

ImageSample sample_with_boxes(std::vector<PartBox> boxes, int size = 64) {
    ImageSample s;
    s.pixels = Image(size, size, 3);
    s.boxes = std::move(boxes);
    return s;
}

PartBox box(double x1, double y1, double x2, double y2, double conf = 1.0) {
    PartBox b;
    b.x1 = x1;
    b.y1 = y1;
    b.x2 = x2;
    b.y2 = y2;
    b.confidence = conf;
    return b;
}

FeatureMap ramp_map(int h, int w, int c) {
    FeatureMap f(h, w, c);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = 0.1 * static_cast<double>(i);
    return f;
}

} // namespace

TEST_CASE("zero noise returns the ground-truth boxes with detector confidences") {
    auto s = sample_with_boxes({box(4, 4, 12, 12), box(20, 20, 30, 28)});
    auto det = simulate_detector(s, DetectorNoise{0, 0, 0, 7});
    REQUIRE(det.size() == 2);
    for (std::size_t i = 0; i < det.size(); ++i) {
        CHECK(det[i].x1 == s.boxes[i].x1);
        CHECK(det[i].y2 == s.boxes[i].y2);
        CHECK(det[i].confidence >= 0.5);
        CHECK(det[i].confidence <= 1.0);
    }
}

TEST_CASE("miss_prob=1 leaves only false positives") {
    auto s = sample_with_boxes({box(4, 4, 12, 12)});
    DetectorNoise noise{0, 1.0, 3.0, 11};
    auto det = simulate_detector(s, noise);
    for (const auto& b : det) {
        CHECK(b.confidence <= 0.6);
        CHECK(b.confidence >= 0.1);
    }
}

TEST_CASE("jitter_frac bounds corner displacement over 1000 seeded draws") {
    auto s = sample_with_boxes({box(20, 20, 30, 30)});
    const double jf = 0.2; // 10x10 box -> corners move at most 2 px
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto det = simulate_detector(s, DetectorNoise{jf, 0, 0, seed});
        REQUIRE(det.size() == 1);
        CHECK(std::abs(det[0].x1 - 20.0) <= 2.0 + 1e-12);
        CHECK(std::abs(det[0].x2 - 30.0) <= 2.0 + 1e-12);
        CHECK(std::abs(det[0].y1 - 20.0) <= 2.0 + 1e-12);
        CHECK(std::abs(det[0].y2 - 30.0) <= 2.0 + 1e-12);
        CHECK(det[0].x1 < det[0].x2);
        CHECK(det[0].y1 < det[0].y2);
    }
}

TEST_CASE("select_top_d keeps the d most confident boxes in descending order") {
    std::vector<PartBox> det;
    for (int i = 0; i < 10; ++i)
        det.push_back(box(i, i, i + 5, i + 5, 0.1 * (i + 1) - 0.05));
    auto top = select_top_d(det, 8, 64, 64);
    REQUIRE(top.size() == 8);
    for (std::size_t i = 1; i < top.size(); ++i)
        CHECK(top[i - 1].confidence >= top[i].confidence);
    CHECK(top[0].confidence == doctest::Approx(0.95));
    CHECK(top[7].confidence == doctest::Approx(0.25));
}

TEST_CASE("select_top_d pads by cycling and falls back to full frames") {
    auto a = box(0, 0, 4, 4, 0.9), b = box(4, 4, 8, 8, 0.8), c = box(8, 8, 12, 12, 0.7);
    // {a,b,c} at d=8 cycles to a,b,c,a,b,c,a,b
    auto padded = select_top_d({a, b, c}, 8, 64, 64);
    REQUIRE(padded.size() == 8);
    CHECK(padded[3].x1 == a.x1);
    CHECK(padded[4].x1 == b.x1);
    CHECK(padded[6].x1 == a.x1);
    CHECK(padded[7].x1 == b.x1);

    auto fallback = select_top_d({}, 4, 48, 64);
    REQUIRE(fallback.size() == 4);
    for (const auto& f : fallback) {
        CHECK(f.confidence == 0.0);
        CHECK(f.x2 == 64.0);
        CHECK(f.y2 == 48.0);
    }
}

TEST_CASE("confidence ties break lexicographically") {
    auto a = box(5, 0, 9, 4, 0.5), b = box(1, 0, 5, 4, 0.5);
    auto top = select_top_d({a, b}, 2, 64, 64);
    CHECK(top[0].x1 == 1.0);
    CHECK(top[1].x1 == 5.0);
}

TEST_CASE("rasterize_mask: full image, quadrant, clamping, degenerate") {
    // full box -> all ones
    auto full = rasterize_mask(box(0, 0, 64, 64), 64, 64, 8, 8);
    CHECK(full.area == 64);

    // top-left quadrant on even geometry, via the coordinate-scaling oracle
    auto quad = rasterize_mask(box(0, 0, 32, 32), 64, 64, 8, 8);
    CHECK(quad.area == 16);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(quad.at(y, x) == ((y < 4 && x < 4) ? 1 : 0));

    // box past the right edge clamps to the last column
    auto clamped = rasterize_mask(box(56, 0, 200, 8), 64, 64, 8, 8);
    CHECK(clamped.area == 1);
    CHECK(clamped.at(0, 7) == 1);

    // degenerate box still rounds up to one cell at its center
    auto degen = rasterize_mask(box(33, 33, 33.01, 33.01), 64, 64, 8, 8);
    CHECK(degen.area == 1);
    CHECK(degen.at(4, 4) == 1);
}

TEST_CASE("rasterize_mask is monotone in the box") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const double x1 = rng.uniform(0, 50), y1 = rng.uniform(0, 50);
        const double x2 = x1 + rng.uniform(1, 14), y2 = y1 + rng.uniform(1, 14);
        auto small = rasterize_mask(box(x1, y1, x2, y2), 64, 64, 8, 8);
        auto grown = rasterize_mask(
            box(std::max(0.0, x1 - rng.uniform(0, 4)), std::max(0.0, y1 - rng.uniform(0, 4)),
                x2 + rng.uniform(0, 4), y2 + rng.uniform(0, 4)),
            64, 64, 8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                if (small.at(y, x)) CHECK(grown.at(y, x));
    }
}

TEST_CASE("apply_mask: identity, hand case, complement partition") {
    FeatureMap f = ramp_map(2, 2, 1);
    f.at(0, 0, 0) = 1;
    f.at(0, 1, 0) = 2;
    f.at(1, 0, 0) = 3;
    f.at(1, 1, 0) = 4;

    PartMask ones(2, 2, {1, 1, 1, 1});
    CHECK(apply_mask(f, ones).v == f.v);

    PartMask diag(2, 2, {1, 0, 0, 1});
    auto masked = apply_mask(f, diag);
    CHECK(masked.at(0, 0, 0) == 1.0);
    CHECK(masked.at(0, 1, 0) == 0.0);
    CHECK(masked.at(1, 0, 0) == 0.0);
    CHECK(masked.at(1, 1, 0) == 4.0);

    auto rest = apply_mask(f, complement_mask(diag));
    for (std::size_t i = 0; i < f.v.size(); ++i)
        CHECK(masked.v[i] + rest.v[i] == f.v[i]);
}

TEST_CASE("apply_mask rejects geometry mismatches") {
    FeatureMap f = ramp_map(4, 4, 2);
    PartMask m(2, 2, {1, 0, 0, 1});
    CHECK_THROWS_AS(apply_mask(f, m), ShapeError);
}

TEST_CASE("PartMask cannot be built with zero area") {
    CHECK_THROWS_AS(PartMask(2, 2, {0, 0, 0, 0}), ShapeError);
    CHECK_THROWS_AS(PartMask(2, 2, {2, 0, 0, 0}), ShapeError);
}

TEST_CASE("proposal cache round-trips") {
    std::map<std::string, std::vector<PartBox>> boxes;
    boxes["images/a.ppm"] = {box(1, 2, 3, 4, 0.5), box(5, 6, 7, 8, 0.25)};
    boxes["images/b.ppm"] = {};
    const std::string path = "/tmp/pgan_test_proposals.tsv";
    write_proposal_cache(path, boxes);
    auto loaded = read_proposal_cache(path);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded["images/a.ppm"].size() == 2);
    CHECK(loaded["images/a.ppm"][1].confidence == 0.25);
    CHECK(loaded["images/b.ppm"].empty());
}

TEST_CASE("make_proposals yields exactly d masks with positive area") {
    auto s = sample_with_boxes({box(4, 4, 12, 12), box(40, 40, 52, 50)});
    auto ps = make_proposals(s, DetectorNoise{0.1, 0.2, 1.0, 3}, 8, 8, 8);
    REQUIRE(ps.boxes.size() == 8);
    REQUIRE(ps.masks.size() == 8);
    for (const auto& m : ps.masks) CHECK(m.area >= 1);
    // descending confidence holds up to the point where cyclic padding
    // restarts the sequence
    for (std::size_t i = 1; i < ps.boxes.size(); ++i) {
        if (ps.boxes[i].confidence > ps.boxes[i - 1].confidence) {
            CHECK(ps.boxes[i].confidence == ps.boxes[0].confidence);
            break;
        }
    }
}
