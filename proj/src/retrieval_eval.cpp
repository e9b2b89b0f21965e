#include "pgan/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pgan/errors.hpp"
#include "pgan/kernels.hpp"

namespace pgan {

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "cosine") return Metric::cosine;
    throw ConfigError("unknown metric '" + name + "'");
}

std::string metric_name(Metric m) {
    return m == Metric::euclidean ? "euclidean" : "cosine";
}

std::string MetricsReport::to_json() const {
    nlohmann::json j{{"mAP", map},
                     {"cmc", cmc},
                     {"queries_evaluated", queries_evaluated},
                     {"queries_skipped", queries_skipped},
                     {"protocol", protocol},
                     {"metric", metric},
                     {"repeats", repeats}};
    if (repeats > 1) {
        j["mAP_std"] = map_std;
        j["cmc_std"] = cmc_std;
    }
    return j.dump(2);
}

std::string MetricsReport::csv_row() const {
    std::ostringstream os;
    os << protocol << "," << metric << "," << map << "," << top_k(1) << ","
       << top_k(5);
    return os.str();
}

Mat distance_matrix(const Mat& queries, const Mat& gallery, Metric metric) {
    if (queries.cols != gallery.cols)
        throw ShapeError("distance_matrix: dimension mismatch");
    Mat out;
    kernels::pairwise_rows(queries, gallery, metric == Metric::cosine, out);
    return out;
}

double average_precision(const std::vector<char>& relevance, int total_relevant) {
    if (total_relevant < 1)
        throw ProtocolError("average_precision: total_relevant must be >= 1");
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (!relevance[k]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return sum / total_relevant;
}

MetricsReport evaluate_distances(const RetrievalProtocol& protocol,
                                 const Mat& dist, int k_max) {
    const int nq = static_cast<int>(protocol.query.samples.size());
    const int ng = static_cast<int>(protocol.gallery.samples.size());
    require(dist.rows == nq && dist.cols == ng,
            "evaluate: distance matrix does not match protocol");

    MetricsReport report;
    report.protocol = protocol.kind == ProtocolKind::veri ? "veri" : "vehicleid";
    k_max = std::min(k_max, ng);
    report.cmc.assign(k_max, 0.0);

    std::vector<double> aps(nq, -1.0);
    std::vector<int> first_rank(nq, -1);
    const bool par = kernels::parallel_enabled();

#pragma omp parallel for schedule(dynamic) if (par)
    for (int q = 0; q < nq; ++q) {
        std::vector<int> valid;
        valid.reserve(ng);
        for (int g = 0; g < ng; ++g)
            if (protocol.valid(q, g)) valid.push_back(g);
        if (valid.empty()) continue;

        std::stable_sort(valid.begin(), valid.end(), [&](int a, int b) {
            if (dist.at(q, a) != dist.at(q, b)) return dist.at(q, a) < dist.at(q, b);
            return a < b;
        });

        const int qid = protocol.query.samples[q].identity;
        std::vector<char> relevance(valid.size());
        int total_relevant = 0;
        int first = -1;
        for (std::size_t r = 0; r < valid.size(); ++r) {
            const bool rel = protocol.gallery.samples[valid[r]].identity == qid;
            relevance[r] = rel;
            if (rel) {
                ++total_relevant;
                if (first < 0) first = static_cast<int>(r) + 1;
            }
        }
        if (total_relevant == 0) continue;
        aps[q] = average_precision(relevance, total_relevant);
        first_rank[q] = first;
    }

    double map_sum = 0.0;
    for (int q = 0; q < nq; ++q) {
        if (aps[q] < 0.0) {
            ++report.queries_skipped;
            continue;
        }
        ++report.queries_evaluated;
        map_sum += aps[q];
        for (int k = 1; k <= k_max; ++k)
            if (first_rank[q] <= k) report.cmc[k - 1] += 1.0;
    }
    if (report.queries_evaluated > 0) {
        report.map = map_sum / report.queries_evaluated;
        for (auto& x : report.cmc) x /= report.queries_evaluated;
    }
    return report;
}

MetricsReport evaluate(const RetrievalProtocol& protocol, const Mat& query_emb,
                       const Mat& gallery_emb, Metric metric, int k_max) {
    require(query_emb.rows == static_cast<int>(protocol.query.samples.size()),
            "evaluate: query embedding count mismatch");
    require(gallery_emb.rows == static_cast<int>(protocol.gallery.samples.size()),
            "evaluate: gallery embedding count mismatch");
    Mat dist = distance_matrix(query_emb, gallery_emb, metric);
    MetricsReport report = evaluate_distances(protocol, dist, k_max);
    report.metric = metric_name(metric);
    return report;
}

MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports) {
    require(!reports.empty(), "aggregate_reports: empty input");
    MetricsReport out = reports.front();
    const int n = static_cast<int>(reports.size());
    out.repeats = n;
    if (n == 1) return out;

    auto mean_std = [n](auto getter) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += getter(i);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = getter(i) - mean;
            var += d * d;
        }
        return std::pair<double, double>(mean, std::sqrt(var / n));
    };

    std::size_t k_max = reports.front().cmc.size();
    for (const auto& r : reports) k_max = std::min(k_max, r.cmc.size());
    out.cmc.resize(k_max);
    out.cmc_std.resize(k_max);

    auto [m, s] = mean_std([&](int i) { return reports[i].map; });
    out.map = m;
    out.map_std = s;
    for (std::size_t k = 0; k < k_max; ++k) {
        auto [cm, cs] = mean_std([&](int i) { return reports[i].cmc[k]; });
        out.cmc[k] = cm;
        out.cmc_std[k] = cs;
    }
    out.queries_evaluated = 0;
    out.queries_skipped = 0;
    for (const auto& r : reports) {
        out.queries_evaluated += r.queries_evaluated;
        out.queries_skipped += r.queries_skipped;
    }
    return out;
}

} // namespace pgan
