#include <doctest.h>

#include <cmath>

#include "pgan/aggregation.hpp"
#include "pgan/rng.hpp"
#include "gradcheck.hpp"

using namespace pgan;

namespace {
FeatureMap random_fmap(int h, int w, int c, Rng& rng) {
    FeatureMap f(h, w, c);
    for (auto& x : f.v) x = rng.uniform(-1.0, 1.0);
    return f;
}

Map4 random_map4(int n, int h, int w, int c, Rng& rng) {
    Map4 m(n, h, w, c);
    for (auto& x : m.v) x = rng.uniform(-1.0, 1.0);
    return m;
}
} // namespace

TEST_CASE("fuse concatenates with F_g channels first and splits back") {
    Rng rng(41);
    FeatureMap a = random_fmap(3, 3, 1, rng);
    FeatureMap b = random_fmap(3, 3, 1, rng);
    FeatureMap f = fuse(a, b);
    CHECK(f.c == 2);
    CHECK(f.at(1, 2, 0) == a.at(1, 2, 0));
    CHECK(f.at(1, 2, 1) == b.at(1, 2, 0));

    FeatureMap fa, fb;
    split_fused(fuse(a, a), fa, fb);
    CHECK(fa.v == a.v);
    CHECK(fb.v == a.v);

    FeatureMap wide_a = random_fmap(2, 2, 5, rng);
    FeatureMap wide_b = random_fmap(2, 2, 5, rng);
    CHECK(fuse(wide_a, wide_b).c == 10);
}

TEST_CASE("gap commutes with fuse") {
    Rng rng(42);
    FeatureMap a = random_fmap(4, 5, 3, rng);
    FeatureMap b = random_fmap(4, 5, 3, rng);
    Embedding ga = gap(a, EmbedRole::global_c);
    Embedding gb = gap(b, EmbedRole::part_c);
    Embedding gf = gap(fuse(a, b), EmbedRole::fused_2c);
    REQUIRE(gf.v.size() == 6);
    for (int c = 0; c < 3; ++c) {
        CHECK(gf.v[c] == ga.v[c]);
        CHECK(gf.v[3 + c] == gb.v[c]);
    }

    FeatureMap constant(2, 2, 1);
    std::fill(constant.v.begin(), constant.v.end(), 0.3);
    CHECK(gap(constant, EmbedRole::global_c).v[0] == doctest::Approx(0.3));

    FeatureMap quad(2, 2, 1);
    quad.at(0, 0, 0) = 1;
    quad.at(0, 1, 0) = 2;
    quad.at(1, 0, 0) = 3;
    quad.at(1, 1, 0) = 4;
    CHECK(gap(quad, EmbedRole::global_c).v[0] == doctest::Approx(2.5));
}

TEST_CASE("SE gate at zero excitation scales all channels by one half") {
    Rng rng(43);
    SEBlock se("se", 6, 2, rng);
    for (auto* p : {&se.fc1.weight, &se.fc1.bias, &se.fc2.weight, &se.fc2.bias})
        std::fill(p->w.begin(), p->w.end(), 0.0);
    Map4 in = random_map4(2, 3, 3, 6, rng);
    Map4 out = se.forward(in);
    for (std::size_t i = 0; i < in.v.size(); ++i)
        CHECK(out.v[i] == doctest::Approx(0.5 * in.v[i]).epsilon(1e-12));
}

TEST_CASE("zeroed residual branch reproduces the projection shortcut") {
    Rng rng(44);
    ResidualBlock res("res", 4, 6, rng);
    std::fill(res.conv2.weight.w.begin(), res.conv2.weight.w.end(), 0.0);
    std::fill(res.conv2.bias.w.begin(), res.conv2.bias.w.end(), 0.0);
    Map4 in = random_map4(2, 4, 4, 4, rng);
    Map4 out = res.forward(in, true);
    Map4 sc = res.shortcut.forward(in);
    CHECK(out.v == sc.v);
}

TEST_CASE("refine gradient (SE + residual) matches finite differences") {
    Rng rng(45);
    Refine refine("refine", 8, 4, 4, rng); // 4x4x8 -> 4x4x4
    Map4 in = random_map4(2, 4, 4, 8, rng);

    const auto proj = gradcheck::projection(2 * 4 * 4 * 4, 5);
    const auto loss = [&] {
        Map4 out = refine.forward(in, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * proj[i];
        return acc;
    };

    Map4 out = refine.forward(in, true);
    Map4 dout(out.n, out.h, out.w, out.c);
    for (std::size_t i = 0; i < dout.v.size(); ++i) dout.v[i] = proj[i];
    for (Param* p : refine.params()) p->zero_grad();
    Map4 din;
    refine.backward(dout, &din);

    for (Param* p : refine.params()) {
        auto res = gradcheck::check(loss, p->w, p->g);
        INFO(p->name << ": " << res.worst);
        CHECK(res.ok());
    }
    auto res = gradcheck::check(loss, in.v, din.v);
    INFO("input: " << res.worst);
    CHECK(res.ok());
}

TEST_CASE("bn_neck normalizes, is deterministic at inference, needs statistics") {
    Rng rng(46);

    // standardized inputs with scale 1 pass through nearly unchanged
    BNNeck neck("neck", 2);
    Mat in(4, 2);
    const double vals[4] = {-1.0, 1.0, -1.0, 1.0}; // zero mean, unit variance
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c) in.at(r, c) = vals[(r + c) % 4];
    Mat out = neck.forward(in, true);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        CHECK(out.v[i] == doctest::Approx(in.v[i]).epsilon(1e-4));

    // batch [0],[2] -> [-1],[1] at eps = 0
    BNNeck exact("exact", 1, 0.1, 0.0);
    Mat two(2, 1);
    two.at(0, 0) = 0.0;
    two.at(1, 0) = 2.0;
    Mat norm = exact.forward(two, true);
    CHECK(norm.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(norm.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // inference is a fixed map
    Mat probe(1, 1);
    probe.at(0, 0) = 0.77;
    Mat e1 = exact.forward(probe, false);
    Mat e2 = exact.forward(probe, false);
    CHECK(e1.v == e2.v);

    // inference before any training statistics is an error
    BNNeck fresh("fresh", 3);
    Mat q(1, 3);
    CHECK_THROWS_AS(fresh.forward(q, false), NumericsError);
}

TEST_CASE("bn_neck gradient matches finite differences") {
    Rng rng(47);
    BNNeck neck("neck", 3);
    for (auto& g : neck.gamma.w) g = rng.uniform(0.5, 1.5);
    Mat in(5, 3);
    for (auto& x : in.v) x = rng.uniform(-2.0, 2.0);

    const auto proj = gradcheck::projection(in.v.size(), 7);
    const auto loss = [&] {
        Mat out = neck.forward(in, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * proj[i];
        return acc;
    };

    Mat out = neck.forward(in, true);
    Mat dout(out.rows, out.cols);
    for (std::size_t i = 0; i < dout.v.size(); ++i) dout.v[i] = proj[i];
    neck.gamma.zero_grad();
    Mat din;
    neck.backward(dout, &din);

    auto res_in = gradcheck::check(loss, in.v, din.v);
    INFO("input: " << res_in.worst);
    CHECK(res_in.ok());
    auto res_g = gradcheck::check(loss, neck.gamma.w, neck.gamma.g);
    INFO("gamma: " << res_g.worst);
    CHECK(res_g.ok());
}
