#include "pgan/losses.hpp"

#include <cmath>
#include <set>

#include "pgan/errors.hpp"

namespace pgan {

double total_loss(double l_c, double l_f, double l_g, double l_p, double lambda) {
    return lambda * l_c + l_f + l_g + l_p;
}

namespace {
double euclidean(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}
} // namespace

double batch_hard_triplet(const Mat& emb, const std::vector<int>& labels,
                          double margin, Mat* demb) {
    const int n = emb.rows;
    require(static_cast<int>(labels.size()) == n,
            "batch_hard_triplet: label count mismatch");

    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw SamplerError("batch_hard_triplet: batch needs at least 2 identities");
    for (int id : distinct) {
        int count = 0;
        for (int l : labels) count += l == id;
        if (count < 2)
            throw SamplerError(
                "batch_hard_triplet: every identity needs at least 2 samples");
    }

    Mat dist(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            dist.at(i, j) = euclidean(emb.row(i), emb.row(j), emb.cols);

    if (demb) *demb = Mat(n, emb.cols);

    double loss = 0.0;
    const double inv_n = 1.0 / n;
    for (int a = 0; a < n; ++a) {
        int hard_pos = -1, hard_neg = -1;
        for (int j = 0; j < n; ++j) {
            if (j == a) continue;
            if (labels[j] == labels[a]) {
                if (hard_pos < 0 || dist.at(a, j) > dist.at(a, hard_pos)) hard_pos = j;
            } else {
                if (hard_neg < 0 || dist.at(a, j) < dist.at(a, hard_neg)) hard_neg = j;
            }
        }
        const double hinge = margin + dist.at(a, hard_pos) - dist.at(a, hard_neg);
        if (hinge <= 0.0) continue;
        loss += hinge;

        if (demb) {
            // d||a-p|| / da = (a-p)/||a-p||; guarded at coincident points
            auto add_pair = [&](int other, double sign) {
                const double d = dist.at(a, other);
                if (d == 0.0) return;
                const double scale = sign * inv_n / d;
                for (int k = 0; k < emb.cols; ++k) {
                    const double diff = emb.at(a, k) - emb.at(other, k);
                    demb->at(a, k) += scale * diff;
                    demb->at(other, k) -= scale * diff;
                }
            };
            add_pair(hard_pos, +1.0);
            add_pair(hard_neg, -1.0);
        }
    }
    return loss / n;
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* dlogits) {
    const int n = logits.rows, c = logits.cols;
    require(static_cast<int>(labels.size()) == n, "cross_entropy: label count");
    if (dlogits) *dlogits = Mat(n, c);

    double loss = 0.0;
    const double inv_n = 1.0 / n;
    std::vector<double> prob(c);
    for (int r = 0; r < n; ++r) {
        const double* z = logits.row(r);
        double mx = z[0];
        for (int j = 0; j < c; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            prob[j] = std::exp(z[j] - mx);
            sum += prob[j];
        }
        for (int j = 0; j < c; ++j) prob[j] /= sum;
        require(labels[r] >= 0 && labels[r] < c, "cross_entropy: label out of range");
        loss -= std::log(prob[labels[r]]);
        if (dlogits) {
            double* dz = dlogits->row(r);
            for (int j = 0; j < c; ++j)
                dz[j] = (prob[j] - (j == labels[r] ? 1.0 : 0.0)) * inv_n;
        }
    }
    return loss * inv_n;
}

Classifier::Classifier(const std::string& name, int dim, int num_classes,
                       Rng& rng) {
    fc = Dense(name, dim, num_classes, /*with_bias=*/false, rng);
}

} // namespace pgan
