#include "pgan/backbone.hpp"

#include "pgan/errors.hpp"

namespace pgan {

int BackboneConfig::total_stride() const {
    int s = 1;
    for (std::size_t i = 0; i < channels.size(); ++i) s *= block_stride(i);
    return s;
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : config(cfg) {
    int ci = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        const int co = cfg.channels[i];
        const std::string name = "backbone.block" + std::to_string(i);
        convs.emplace_back(name + ".conv", 3, cfg.block_stride(i), 1, ci, co, rng);
        bns.emplace_back(name + ".bn", co);
        relus.emplace_back();
        ci = co;
    }
}

Map4 Backbone::forward_batch(const Map4& images, bool train) {
    require(images.c == config.in_channels,
            "backbone: input channel count does not match config");
    Map4 x = images;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        x = convs[i].forward(x);
        x = bns[i].forward(x, train);
        x = relus[i].forward(x);
    }
    return x;
}

void Backbone::backward(const Map4& dfeat, Map4* din) {
    Map4 d = dfeat, tmp;
    for (std::size_t i = convs.size(); i-- > 0;) {
        relus[i].backward(d, &tmp);
        bns[i].backward(tmp, &d);
        const bool need_input = i > 0 || din != nullptr;
        convs[i].backward(d, need_input ? &tmp : nullptr);
        if (i > 0) {
            d = tmp;
        } else if (din) {
            *din = tmp;
        }
    }
}

FeatureMap Backbone::forward(const Image& image) {
    Map4 batch(1, image.h, image.w, image.ch);
    batch.v = image.v;
    Map4 out = forward_batch(batch, /*train=*/false);
    return slice_sample(out, 0, image.h, image.w);
}

std::vector<Param*> Backbone::params() {
    std::vector<Param*> out;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        out.push_back(&convs[i].weight);
        out.push_back(&convs[i].bias);
        out.push_back(&bns[i].gamma);
        out.push_back(&bns[i].beta);
    }
    return out;
}

Embedding baseline_embed(const FeatureMap& fg) {
    return gap(fg, EmbedRole::global_c);
}

} // namespace pgan
