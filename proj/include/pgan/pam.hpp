#pragma once

#include <cstdint>
#include <vector>

#include "pgan/nn.hpp"
#include "pgan/part_proposals.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

/// Soft attention over the D parts; a simplex vector.
struct AttentionWeights {
    std::vector<double> w;

    void validate(double tol = 1e-9) const;
    static AttentionWeights uniform(int d);
};

/// Mask-guided average pooling: per channel, the mean of entries under the
/// mask, dividing by the mask area rather than H*W.
std::vector<double> mgap(const FeatureMap& fi, const PartMask& m);

/// Gradient of a scalar loss through mgap: scatters dpooled/area into the
/// masked cells of dfi.
void mgap_backward(const std::vector<double>& dpooled, const PartMask& m,
                   FeatureMap& dfi);

/// Overflow-safe softmax (max subtraction).
std::vector<double> softmax(const std::vector<double>& scores);
/// dscores given dL/dw at the softmax output w.
std::vector<double> softmax_backward(const std::vector<double>& w,
                                     const std::vector<double>& dw);

/// The learnable part-importance function: a weight-normalized FC C->C, layer
/// normalization, a rectifier, then the channel-wise mean to one scalar. One
/// set of weights shared by all D parts.
class Psi {
public:
    struct Cache {
        std::vector<double> input;     // v
        std::vector<double> dot;       // raw FC dot products
        std::vector<double> norm;      // per-row direction norms
        std::vector<double> ln_xhat;
        std::vector<double> post_ln;   // gamma*xhat + beta (pre-relu)
        double ln_invstd = 0.0;
    };

    /// Gradients for one backward call; accumulated into the Params later so
    /// per-sample evaluations can run in parallel and reduce in order.
    struct Grads {
        std::vector<double> direction, gain, bias, ln_gamma, ln_beta;
        explicit Grads(int c)
            : direction(static_cast<std::size_t>(c) * c, 0.0), gain(c, 0.0),
              bias(c, 0.0), ln_gamma(c, 0.0), ln_beta(c, 0.0) {}
        void add_to(Grads& other) const;
    };

    Psi() = default;
    Psi(const std::string& name, int c, Rng& rng);

    double forward(const std::vector<double>& v, Cache* cache) const;
    double value(const std::vector<double>& v) const { return forward(v, nullptr); }
    /// dv gets the input gradient; parameter gradients go into grads.
    void backward(const Cache& cache, double ds, std::vector<double>& dv,
                  Grads& grads) const;
    void apply_grads(const Grads& grads);

    std::vector<Param*> params();

    Param direction; // (C, C) row directions of the weight-normalized FC
    Param gain;      // per-row scale g
    Param bias;
    Param ln_gamma, ln_beta;
    int channels = 0;
    double ln_eps = 1e-5;
};

/// Eq.-level attention op: psi scores over the pooled part vectors, softmax
/// normalized.
AttentionWeights attention_weights(const std::vector<std::vector<double>>& pooled,
                                   const Psi& psi);

/// F_p = sum_i w_i * F_i + F_g.
FeatureMap compose_part_feature(const FeatureMap& fg,
                                const std::vector<FeatureMap>& parts,
                                const AttentionWeights& w);

/// Channel-wise mean, min-max scaled to [0,255]; a constant map maps to all
/// zeros.
std::vector<std::uint8_t> pam_heatmap(const FeatureMap& fp);

} // namespace pgan
