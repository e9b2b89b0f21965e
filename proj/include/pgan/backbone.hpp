#pragma once

#include <vector>

#include "pgan/aggregation.hpp"
#include "pgan/image_io.hpp"
#include "pgan/nn.hpp"

namespace pgan {

/// Small convolutional stack standing in for the paper-scale ResNet50: every
/// block is conv3x3 + BN + relu at stride 2, except the final block whose
/// stride drops to 1 when the last downsample is removed.
struct BackboneConfig {
    std::vector<int> channels = {16, 32, 64, 64};
    int in_channels = 3;
    bool remove_last_stride = true;

    int total_stride() const;
    int block_stride(std::size_t i) const {
        const bool last = i + 1 == channels.size();
        return (last && remove_last_stride) ? 1 : 2;
    }
};

class Backbone {
public:
    Backbone() = default;
    Backbone(const BackboneConfig& cfg, Rng& rng);

    Map4 forward_batch(const Map4& images, bool train);
    /// din may be null when input gradients are not needed.
    void backward(const Map4& dfeat, Map4* din);

    /// Single-image inference convenience; carries the source geometry.
    FeatureMap forward(const Image& image);

    std::vector<Param*> params();

    BackboneConfig config;
    std::vector<Conv2d> convs;
    std::vector<BatchNorm2d> bns;
    std::vector<ReluLayer> relus;

    int out_channels() const { return config.channels.back(); }
};

/// GAP-only embedding of the global feature map (the plain baseline study).
Embedding baseline_embed(const FeatureMap& fg);

} // namespace pgan
