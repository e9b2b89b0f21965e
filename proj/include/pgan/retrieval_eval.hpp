#pragma once

#include <string>
#include <vector>

#include "pgan/data_model.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

enum class Metric { euclidean, cosine };

Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);

struct MetricsReport {
    double map = 0.0;
    std::vector<double> cmc;          // cmc[k-1] = Top-k rate
    int queries_evaluated = 0;
    int queries_skipped = 0;          // no valid relevant gallery entry
    std::string protocol;
    std::string metric;
    int repeats = 1;                  // protocol seeds averaged
    double map_std = 0.0;
    std::vector<double> cmc_std;

    double top_k(int k) const { return cmc.at(k - 1); }
    std::string to_json() const;
    std::string csv_row() const;      // protocol,metric,mAP,top1,top5
};

/// Pairwise distances between query and gallery rows. Cosine distance is
/// 1 - cosine similarity; a zero-norm vector raises NumericsError naming the
/// offending index.
Mat distance_matrix(const Mat& queries, const Mat& gallery, Metric metric);

/// AP over a ranked relevance sequence: mean of precision@k over the
/// relevant ranks.
double average_precision(const std::vector<char>& relevance, int total_relevant);

/// Full protocol-aware evaluation. Valid gallery entries are ranked by
/// distance with ties broken by gallery index; CMC@K counts queries whose
/// first correct match lands within rank K.
MetricsReport evaluate(const RetrievalProtocol& protocol, const Mat& query_emb,
                       const Mat& gallery_emb, Metric metric, int k_max = 20);

/// Same, from a precomputed distance matrix (rank-invariance tests use this).
MetricsReport evaluate_distances(const RetrievalProtocol& protocol,
                                 const Mat& dist, int k_max = 20);

/// Mean/std aggregation over repeated protocols (the vehicleid 10-seed rule).
MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports);

} // namespace pgan
