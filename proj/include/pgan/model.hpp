#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgan/aggregation.hpp"
#include "pgan/backbone.hpp"
#include "pgan/losses.hpp"
#include "pgan/pam.hpp"

namespace pgan {

/// The four Table-III rows: plain global baseline, grid attention over every
/// feature cell, part guidance with fixed uniform weights, and the full model.
enum class Variant { baseline, grid, pgan_uniform, pgan };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::pgan;
    int d = 8;
    BackboneConfig backbone;
    int c_prime = 32;
    int se_reduction = 4;
    int num_classes = 2;
    double margin = 0.3;
    double lambda = 2.0;
    /// The attention head sees few gradient steps at desk scale; a larger
    /// per-group learning rate lets the softmax become decisive in time.
    double psi_lr_scale = 10.0;
    int img_h = 64, img_w = 64, img_ch = 3;

    bool uses_parts() const { return variant != Variant::baseline; }
    bool uses_psi() const {
        return variant == Variant::pgan || variant == Variant::grid;
    }
    int feat_h() const { return img_h / backbone.total_stride(); }
    int feat_w() const { return img_w / backbone.total_stride(); }
    /// Parts entering the attention: D for detector-guided variants, one per
    /// feature cell for grid attention.
    int effective_d() const {
        return variant == Variant::grid ? feat_h() * feat_w() : d;
    }
    int embed_dim() const { return 2 * c_prime; }
};

class PganModel {
public:
    PganModel() = default;
    PganModel(const ModelConfig& cfg, std::uint64_t seed);

    /// Forward + backward for one batch; gradients accumulate into the
    /// params. masks[n] supplies the D masks of sample n (ignored for
    /// baseline and grid).
    LossReport train_step(const Map4& images,
                          const std::vector<const std::vector<PartMask>*>& masks,
                          const std::vector<int>& labels);

    /// Inference-mode final representation (the BN-neck fused embedding).
    Mat embed(const Map4& images,
              const std::vector<const std::vector<PartMask>*>& masks);

    struct AttentionInfo {
        std::vector<double> weights;
        std::vector<std::uint8_t> heatmap; // feat_h x feat_w bytes
    };
    /// Per-sample attention weights and part-feature heatmaps (inference).
    std::vector<AttentionInfo> attention(
        const Map4& images,
        const std::vector<const std::vector<PartMask>*>& masks);

    std::vector<Param*> params();
    /// Params plus non-learned state (BN running statistics), for
    /// checkpointing. Bool flags are encoded as 1-element vectors.
    std::vector<std::pair<std::string, std::vector<double>*>> state_entries();
    void mark_statistics_ready();

    ModelConfig config;
    Backbone backbone;
    Psi psi;
    Refine refine_f, refine_g, refine_p;
    BNNeck neck;
    Classifier classifier;

private:
    struct PamCache {
        std::vector<std::vector<double>> pooled;
        std::vector<Psi::Cache> psi_caches;
        std::vector<double> weights;
    };

    Map4 forward_maps(const Map4& images,
                      const std::vector<const std::vector<PartMask>*>& masks,
                      bool train, Map4& fg, std::vector<PamCache>* caches,
                      std::vector<AttentionInfo>* info);
    const std::vector<PartMask>& masks_for(
        int sample, const std::vector<const std::vector<PartMask>*>& masks) const;

    std::vector<PartMask> grid_masks_;
};

} // namespace pgan
