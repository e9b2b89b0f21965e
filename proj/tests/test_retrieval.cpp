#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pgan/retrieval_eval.hpp"
#include "pgan/rng.hpp"
#include "reference_kernels.hpp"

using namespace pgan;

namespace {

Dataset labeled_samples(const std::vector<int>& ids, const std::vector<int>& cams) {
    Dataset ds;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ImageSample s;
        s.identity = ids[i];
        s.source_id = ids[i];
        s.camera = cams.empty() ? 0 : cams[i];
        s.file = "im" + std::to_string(i);
        ds.samples.push_back(std::move(s));
    }
    std::set<int> distinct(ids.begin(), ids.end());
    ds.num_identities = static_cast<int>(distinct.size());
    return ds;
}

RetrievalProtocol direct_protocol(const std::vector<int>& query_ids,
                                  const std::vector<int>& gallery_ids,
                                  const std::vector<std::uint8_t>& validity) {
    RetrievalProtocol proto;
    proto.query = labeled_samples(query_ids, {});
    proto.gallery = labeled_samples(gallery_ids, {});
    proto.validity = validity;
    return proto;
}

/// Independent naive evaluator: selection sort, definitional AP, plain loops.
struct OracleOut {
    double map = 0.0;
    std::vector<double> cmc;
    int evaluated = 0, skipped = 0;
};

OracleOut oracle_eval(const RetrievalProtocol& proto, const Mat& q, const Mat& g,
                      bool cosine, int kmax) {
    const int nq = q.rows, ng = g.rows;
    kmax = std::min(kmax, ng);
    OracleOut out;
    out.cmc.assign(kmax, 0.0);
    double sum = 0.0;
    for (int qi = 0; qi < nq; ++qi) {
        std::vector<std::pair<double, int>> order;
        for (int gi = 0; gi < ng; ++gi) {
            if (!proto.valid(qi, gi)) continue;
            const double d = cosine ? refk::cosine_dist(q.row(qi), g.row(gi), q.cols)
                                    : refk::euclid(q.row(qi), g.row(gi), q.cols);
            order.emplace_back(d, gi);
        }
        // selection sort with (distance, index) ordering
        for (std::size_t a = 0; a < order.size(); ++a) {
            std::size_t best = a;
            for (std::size_t b = a + 1; b < order.size(); ++b)
                if (order[b] < order[best]) best = b;
            std::swap(order[a], order[best]);
        }
        int total_rel = 0, hits = 0, first = -1;
        double ap = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r)
            if (proto.gallery.samples[order[r].second].identity ==
                proto.query.samples[qi].identity)
                ++total_rel;
        if (total_rel == 0) {
            ++out.skipped;
            continue;
        }
        for (std::size_t r = 0; r < order.size(); ++r) {
            const bool rel = proto.gallery.samples[order[r].second].identity ==
                             proto.query.samples[qi].identity;
            if (rel) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(r + 1);
                if (first < 0) first = static_cast<int>(r) + 1;
            }
        }
        ap /= total_rel;
        sum += ap;
        ++out.evaluated;
        for (int k = 1; k <= kmax; ++k)
            if (first <= k) out.cmc[k - 1] += 1.0;
    }
    if (out.evaluated) {
        out.map = sum / out.evaluated;
        for (auto& x : out.cmc) x /= out.evaluated;
    }
    return out;
}

} // namespace

TEST_CASE("distance_matrix geometry facts") {
    Mat a(1, 3), b(2, 3);
    a.at(0, 0) = 1.0;          // e_x
    b.at(0, 0) = 1.0;          // e_x
    b.at(1, 1) = 1.0;          // e_y
    Mat de = distance_matrix(a, b, Metric::euclidean);
    Mat dc = distance_matrix(a, b, Metric::cosine);
    CHECK(de.at(0, 0) == 0.0);
    CHECK(dc.at(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(de.at(0, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(dc.at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("distance_matrix matches the per-pair scalar oracle to 1e-12") {
    Rng rng(71);
    Mat q(5, 3), g(7, 3);
    for (auto& x : q.v) x = rng.uniform(-2, 2);
    for (auto& x : g.v) x = rng.uniform(-2, 2);
    Mat de = distance_matrix(q, g, Metric::euclidean);
    Mat dc = distance_matrix(q, g, Metric::cosine);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 7; ++j) {
            CHECK(std::abs(de.at(i, j) - refk::euclid(q.row(i), g.row(j), 3)) <= 1e-12);
            CHECK(std::abs(dc.at(i, j) - refk::cosine_dist(q.row(i), g.row(j), 3)) <=
                  1e-12);
        }
}

TEST_CASE("average precision: named hand cases") {
    CHECK(average_precision({1, 0, 1}, 2) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(average_precision({1, 1, 1, 0, 0}, 3) == 1.0);
    for (int r = 1; r <= 6; ++r) {
        std::vector<char> rel(6, 0);
        rel[r - 1] = 1;
        CHECK(average_precision(rel, 1) == doctest::Approx(1.0 / r));
    }
    CHECK_THROWS_AS(average_precision({0, 0}, 0), ProtocolError);
}

TEST_CASE("perfect embeddings give mAP 1.0 and CMC@1 1.0") {
    const std::vector<int> ids{0, 0, 1, 1, 2, 2};
    RetrievalProtocol proto =
        direct_protocol(ids, ids, []() {
            std::vector<std::uint8_t> v(36, 1);
            for (int i = 0; i < 6; ++i) v[i * 6 + i] = 0; // self-match excluded
            return v;
        }());
    Mat emb(6, 3);
    for (int i = 0; i < 6; ++i) emb.at(i, ids[i]) = 1.0; // one-hot by identity
    MetricsReport r = evaluate(proto, emb, emb, Metric::euclidean, 5);
    CHECK(r.map == 1.0);
    CHECK(r.top_k(1) == 1.0);
    CHECK(r.queries_skipped == 0);
}

TEST_CASE("mAP is the mean of the per-query APs") {
    // query 0 ranking (+,-,+) with 2 relevant -> 5/6; query 1 (-,+,-) with 1 -> 1/2
    RetrievalProtocol proto = direct_protocol({0, 1}, {0, 9, 0, 1, 8, 7},
                                              std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0,
                                                                        0, 0, 0, 1, 1, 1});
    Mat dist(2, 6);
    dist.at(0, 0) = 0.1;
    dist.at(0, 1) = 0.2;
    dist.at(0, 2) = 0.3;
    dist.at(1, 4) = 0.1;
    dist.at(1, 3) = 0.2;
    dist.at(1, 5) = 0.3;
    MetricsReport r = evaluate_distances(proto, dist, 3);
    CHECK(r.map == doctest::Approx((5.0 / 6.0 + 0.5) / 2.0).epsilon(1e-15));
}

TEST_CASE("evaluate equals the brute-force oracle exactly on random protocols") {
    Rng rng(72);
    for (int trial = 0; trial < 30; ++trial) {
        const int nq = 2 + static_cast<int>(rng.uniform_int(19));
        const int ng = 5 + static_cast<int>(rng.uniform_int(46));
        const int dim = 2 + static_cast<int>(rng.uniform_int(5));
        const int num_ids = 2 + static_cast<int>(rng.uniform_int(6));

        std::vector<int> qids(nq), gids(ng);
        for (auto& id : qids) id = static_cast<int>(rng.uniform_int(num_ids));
        for (auto& id : gids) id = static_cast<int>(rng.uniform_int(num_ids));
        std::vector<std::uint8_t> validity(static_cast<std::size_t>(nq) * ng);
        for (auto& v : validity) v = rng.bernoulli(0.9);

        RetrievalProtocol proto = direct_protocol(qids, gids, validity);
        Mat q(nq, dim), g(ng, dim);
        for (auto& x : q.v) x = rng.uniform(-1, 1);
        for (auto& x : g.v) x = rng.uniform(-1, 1);

        for (Metric metric : {Metric::euclidean, Metric::cosine}) {
            MetricsReport got = evaluate(proto, q, g, metric, 10);
            OracleOut expect =
                oracle_eval(proto, q, g, metric == Metric::cosine, 10);
            REQUIRE(got.map == expect.map);
            REQUIRE(got.cmc.size() == expect.cmc.size());
            for (std::size_t k = 0; k < got.cmc.size(); ++k)
                REQUIRE(got.cmc[k] == expect.cmc[k]);
            REQUIRE(got.queries_evaluated == expect.evaluated);
            REQUIRE(got.queries_skipped == expect.skipped);
        }
    }
}

TEST_CASE("CMC is monotone and saturates when every query has a match") {
    Rng rng(73);
    const std::vector<int> ids{0, 0, 1, 1, 2, 2, 3, 3};
    std::vector<std::uint8_t> validity(64, 1);
    for (int i = 0; i < 8; ++i) validity[i * 8 + i] = 0;
    RetrievalProtocol proto = direct_protocol(ids, ids, validity);
    Mat emb(8, 4);
    for (auto& x : emb.v) x = rng.uniform(-1, 1);
    MetricsReport r = evaluate(proto, emb, emb, Metric::euclidean, 8);
    for (std::size_t k = 1; k < r.cmc.size(); ++k) CHECK(r.cmc[k] >= r.cmc[k - 1]);
    CHECK(r.cmc.back() == 1.0);
}

TEST_CASE("gallery permutation leaves the report unchanged") {
    Rng rng(74);
    const int nq = 6, ng = 12;
    std::vector<int> qids(nq), gids(ng);
    for (auto& id : qids) id = static_cast<int>(rng.uniform_int(3));
    for (auto& id : gids) id = static_cast<int>(rng.uniform_int(3));
    std::vector<std::uint8_t> validity(nq * ng, 1);
    RetrievalProtocol proto = direct_protocol(qids, gids, validity);
    Mat q(nq, 4), g(ng, 4);
    for (auto& x : q.v) x = rng.uniform(-1, 1);
    for (auto& x : g.v) x = rng.uniform(-1, 1);
    MetricsReport base = evaluate(proto, q, g, Metric::euclidean, 6);

    std::vector<int> perm(ng);
    for (int i = 0; i < ng; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<int> gids2(ng);
    Mat g2(ng, 4);
    for (int i = 0; i < ng; ++i) {
        gids2[i] = gids[perm[i]];
        std::copy(g.row(perm[i]), g.row(perm[i]) + 4, g2.row(i));
    }
    RetrievalProtocol proto2 = direct_protocol(qids, gids2, validity);
    MetricsReport permuted = evaluate(proto2, q, g2, Metric::euclidean, 6);
    CHECK(base.map == doctest::Approx(permuted.map).epsilon(1e-12));
    for (std::size_t k = 0; k < base.cmc.size(); ++k)
        CHECK(base.cmc[k] == permuted.cmc[k]);
}

TEST_CASE("strictly increasing distance transforms change nothing") {
    Rng rng(75);
    const int nq = 5, ng = 15;
    std::vector<int> qids(nq), gids(ng);
    for (auto& id : qids) id = static_cast<int>(rng.uniform_int(3));
    for (auto& id : gids) id = static_cast<int>(rng.uniform_int(3));
    RetrievalProtocol proto =
        direct_protocol(qids, gids, std::vector<std::uint8_t>(nq * ng, 1));
    Mat dist(nq, ng);
    for (auto& x : dist.v) x = rng.uniform(0.0, 3.0);

    MetricsReport base = evaluate_distances(proto, dist, 8);
    Mat warped(nq, ng);
    for (std::size_t i = 0; i < dist.v.size(); ++i)
        warped.v[i] = std::exp(2.0 * dist.v[i]) + 1.0;
    MetricsReport same = evaluate_distances(proto, warped, 8);
    CHECK(base.map == same.map);
    for (std::size_t k = 0; k < base.cmc.size(); ++k)
        CHECK(base.cmc[k] == same.cmc[k]);
}

TEST_CASE("queries without valid matches land in the skipped tally") {
    RetrievalProtocol proto = direct_protocol({0, 1}, {0, 2},
                                              std::vector<std::uint8_t>{1, 1, 1, 1});
    Mat q(2, 2), g(2, 2);
    q.at(0, 0) = 1;
    q.at(1, 1) = 1;
    g.at(0, 0) = 1;
    g.at(1, 1) = 1;
    MetricsReport r = evaluate(proto, q, g, Metric::euclidean, 2);
    CHECK(r.queries_evaluated == 1);
    CHECK(r.queries_skipped == 1); // identity 1 has no relevant gallery entry
}

TEST_CASE("random embeddings score near the analytic chance level") {
    Rng rng(76);
    const int num_ids = 16, per_id = 6;
    std::vector<int> ids, cams;
    for (int id = 0; id < num_ids; ++id)
        for (int j = 0; j < per_id; ++j) {
            ids.push_back(id);
            cams.push_back(0);
        }
    Dataset ds = labeled_samples(ids, cams);

    // vehicleid protocol: each query has exactly one relevant among num_ids
    double cmc1 = 0.0;
    int runs = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RetrievalProtocol proto = split_protocol(ds, ProtocolKind::vehicleid, seed);
        Mat q(static_cast<int>(proto.query.samples.size()), 8);
        Mat g(static_cast<int>(proto.gallery.samples.size()), 8);
        for (auto& x : q.v) x = rng.uniform(-1, 1);
        for (auto& x : g.v) x = rng.uniform(-1, 1);
        MetricsReport r = evaluate(proto, q, g, Metric::euclidean, 5);
        cmc1 += r.top_k(1);
        ++runs;
    }
    cmc1 /= runs;
    const double chance = 1.0 / num_ids;
    const int n_queries = num_ids * (per_id - 1) * runs;
    const double sigma = std::sqrt(chance * (1 - chance) / n_queries);
    CHECK(std::abs(cmc1 - chance) <= 5.0 * sigma);
}
