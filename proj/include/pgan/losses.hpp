#pragma once

#include <vector>

#include "pgan/nn.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

struct LossReport {
    double l_c = 0, l_f = 0, l_g = 0, l_p = 0, total = 0;
};

/// L = lambda*L_c + L_f + L_g + L_p.
double total_loss(double l_c, double l_f, double l_g, double l_p, double lambda);

/// Batch-hard triplet loss: per anchor, the hinge between its farthest
/// positive and nearest negative under Euclidean distance, averaged over
/// anchors. demb, when given, receives the gradient. Requires at least two
/// identities and two samples per identity.
double batch_hard_triplet(const Mat& emb, const std::vector<int>& labels,
                          double margin, Mat* demb = nullptr);

/// Softmax cross-entropy averaged over the batch; dlogits optional.
double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* dlogits = nullptr);

/// Bias-free linear head over train identities.
class Classifier {
public:
    Classifier() = default;
    Classifier(const std::string& name, int dim, int num_classes, Rng& rng);

    Mat forward(const Mat& emb) { return fc.forward(emb); }
    void backward(const Mat& dlogits, Mat* demb) { fc.backward(dlogits, demb); }

    Dense fc;
};

} // namespace pgan
