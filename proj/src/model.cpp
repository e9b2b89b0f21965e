#include "pgan/model.hpp"

#include <cmath>

#include "pgan/errors.hpp"

namespace pgan {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::grid: return "grid";
        case Variant::pgan_uniform: return "pgan_uniform";
        case Variant::pgan: return "pgan";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "baseline") return Variant::baseline;
    if (name == "grid") return Variant::grid;
    if (name == "pgan_uniform") return Variant::pgan_uniform;
    if (name == "pgan") return Variant::pgan;
    throw ConfigError("unknown variant '" + name + "'");
}

PganModel::PganModel(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
    // independent init streams per module, so ablated variants share the
    // surviving modules' initializations exactly
    Rng rng_bb(derive_seed(seed, 0x6d6f64ULL, 1));
    Rng rng_refine(derive_seed(seed, 0x6d6f64ULL, 2));
    Rng rng_psi(derive_seed(seed, 0x6d6f64ULL, 3));
    Rng rng_head(derive_seed(seed, 0x6d6f64ULL, 4));

    backbone = Backbone(cfg.backbone, rng_bb);
    const int c = cfg.backbone.channels.back();
    const int cp = cfg.c_prime;

    if (cfg.uses_parts()) {
        refine_f = Refine("refine_f", 2 * c, 2 * cp, cfg.se_reduction, rng_refine);
        refine_g = Refine("refine_g", c, cp, cfg.se_reduction, rng_refine);
        refine_p = Refine("refine_p", c, cp, cfg.se_reduction, rng_refine);
    } else {
        refine_f = Refine("refine_f", c, 2 * cp, cfg.se_reduction, rng_refine);
    }
    if (cfg.uses_psi()) {
        psi = Psi("pam.psi", c, rng_psi);
        for (Param* p : psi.params()) p->lr_scale = cfg.psi_lr_scale;
    }
    neck = BNNeck("neck", 2 * cp);
    classifier = Classifier("classifier", 2 * cp, cfg.num_classes, rng_head);
    if (cfg.variant == Variant::grid)
        grid_masks_ = grid_masks(cfg.feat_h(), cfg.feat_w());
}

const std::vector<PartMask>& PganModel::masks_for(
    int sample, const std::vector<const std::vector<PartMask>*>& masks) const {
    if (config.variant == Variant::grid) return grid_masks_;
    require(sample < static_cast<int>(masks.size()) && masks[sample] != nullptr,
            "model: missing part masks for sample");
    return *masks[sample];
}

Map4 PganModel::forward_maps(const Map4& images,
                             const std::vector<const std::vector<PartMask>*>& masks,
                             bool train, Map4& fg, std::vector<PamCache>* caches,
                             std::vector<AttentionInfo>* info) {
    require(images.h == config.img_h && images.w == config.img_w &&
                images.c == config.img_ch,
            "model: image geometry does not match config");
    fg = backbone.forward_batch(images, train);
    if (!config.uses_parts()) return Map4();

    const int n = images.n;
    Map4 fp(n, fg.h, fg.w, fg.c);
    if (caches) caches->assign(n, PamCache{});
    if (info) info->assign(n, AttentionInfo{});
    const bool par = kernels::parallel_enabled();

#pragma omp parallel for schedule(dynamic) if (par)
    for (int ni = 0; ni < n; ++ni) {
        const auto& ms = masks_for(ni, masks);
        FeatureMap fg_n = slice_sample(fg, ni, config.img_h, config.img_w);
        std::vector<FeatureMap> parts;
        parts.reserve(ms.size());
        for (const auto& m : ms) parts.push_back(apply_mask(fg_n, m));

        AttentionWeights w;
        PamCache cache;
        if (config.uses_psi()) {
            cache.pooled.resize(ms.size());
            cache.psi_caches.resize(ms.size());
            std::vector<double> scores(ms.size());
            for (std::size_t i = 0; i < ms.size(); ++i) {
                cache.pooled[i] = mgap(parts[i], ms[i]);
                scores[i] = psi.forward(cache.pooled[i], &cache.psi_caches[i]);
            }
            w.w = softmax(scores);
        } else {
            w = AttentionWeights::uniform(static_cast<int>(ms.size()));
        }
        cache.weights = w.w;

        FeatureMap fp_n = compose_part_feature(fg_n, parts, w);
        store_sample(fp, ni, fp_n);
        if (caches) (*caches)[ni] = std::move(cache);
        if (info) {
            (*info)[ni].weights = w.w;
            (*info)[ni].heatmap = pam_heatmap(fp_n);
        }
    }
    return fp;
}

LossReport PganModel::train_step(const Map4& images,
                                 const std::vector<const std::vector<PartMask>*>& masks,
                                 const std::vector<int>& labels) {
    Map4 fg;
    std::vector<PamCache> caches;
    Map4 fp = forward_maps(images, masks, /*train=*/true, fg, &caches, nullptr);

    const bool parts = config.uses_parts();
    Map4 ff = parts ? fuse_batch(fg, fp) : fg;

    Map4 rf = refine_f.forward(ff, true);
    Mat e_f;
    kernels::gap_forward(rf, e_f);

    Mat e_g, e_p;
    Map4 rg, rp;
    if (parts) {
        rg = refine_g.forward(fg, true);
        kernels::gap_forward(rg, e_g);
        rp = refine_p.forward(fp, true);
        kernels::gap_forward(rp, e_p);
    }

    Mat e_fb = neck.forward(e_f, true);
    Mat logits = classifier.forward(e_fb);

    LossReport report;
    Mat dlogits, de_f, de_g, de_p;
    report.l_c = cross_entropy(logits, labels, &dlogits);
    report.l_f = batch_hard_triplet(e_f, labels, config.margin, &de_f);
    if (parts) {
        report.l_g = batch_hard_triplet(e_g, labels, config.margin, &de_g);
        report.l_p = batch_hard_triplet(e_p, labels, config.margin, &de_p);
    }
    report.total =
        total_loss(report.l_c, report.l_f, report.l_g, report.l_p, config.lambda);

    if (!std::isfinite(report.total))
        throw NumericsError("training loss is not finite");

    // ----- backward -----
    for (auto& x : dlogits.v) x *= config.lambda;
    Mat de_fb;
    classifier.backward(dlogits, &de_fb);
    Mat de_f_neck;
    neck.backward(de_fb, &de_f_neck);
    for (std::size_t i = 0; i < de_f.v.size(); ++i) de_f.v[i] += de_f_neck.v[i];

    Map4 drf;
    kernels::gap_backward(de_f, rf.h, rf.w, drf);
    Map4 dff;
    refine_f.backward(drf, &dff);

    if (!parts) {
        backbone.backward(dff, nullptr);
        return report;
    }

    // split fused gradient into the two channel halves
    const int c = fg.c;
    Map4 dfg(fg.n, fg.h, fg.w, c), dfp(fg.n, fg.h, fg.w, c);
    {
        const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
        for (int ni = 0; ni < fg.n; ++ni)
            for (int y = 0; y < fg.h; ++y)
                for (int x = 0; x < fg.w; ++x) {
                    const double* src = dff.v.data() + dff.offset(ni, y, x);
                    double* dg = dfg.v.data() + dfg.offset(ni, y, x);
                    double* dp = dfp.v.data() + dfp.offset(ni, y, x);
                    for (int ch = 0; ch < c; ++ch) {
                        dg[ch] = src[ch];
                        dp[ch] = src[c + ch];
                    }
                }
    }

    Map4 drg;
    kernels::gap_backward(de_g, rg.h, rg.w, drg);
    Map4 dfg_g;
    refine_g.backward(drg, &dfg_g);
    for (std::size_t i = 0; i < dfg.v.size(); ++i) dfg.v[i] += dfg_g.v[i];

    Map4 drp;
    kernels::gap_backward(de_p, rp.h, rp.w, drp);
    Map4 dfp_p;
    refine_p.backward(drp, &dfp_p);
    for (std::size_t i = 0; i < dfp.v.size(); ++i) dfp.v[i] += dfp_p.v[i];

    // attention backward, parallel per sample with an ordered psi reduction
    const int n = images.n;
    const bool use_psi = config.uses_psi();
    std::vector<Psi::Grads> psi_grads(
        static_cast<std::size_t>(use_psi ? n : 0), Psi::Grads(use_psi ? psi.channels : 1));
    const bool par = kernels::parallel_enabled();

#pragma omp parallel for schedule(dynamic) if (par)
    for (int ni = 0; ni < n; ++ni) {
        const auto& ms = masks_for(ni, masks);
        const std::size_t d = ms.size();
        FeatureMap fg_n = slice_sample(fg, ni);
        FeatureMap dfp_n = slice_sample(dfp, ni);
        FeatureMap dfg_n(fg.h, fg.w, c);
        const std::vector<double>& w = caches[ni].weights;

        // identity term of F_p = sum w_i F_i + F_g
        for (std::size_t k = 0; k < dfg_n.v.size(); ++k) dfg_n.v[k] = dfp_n.v[k];

        // per-part mask path and, for learned attention, the score path
        std::vector<double> dw(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const PartMask& m = ms[i];
            const double wi = w[i];
            double dot = 0.0;
            for (int y = 0; y < fg.h; ++y)
                for (int x = 0; x < fg.w; ++x) {
                    if (!m.at(y, x)) continue;
                    const std::size_t off =
                        (static_cast<std::size_t>(y) * fg.w + x) * c;
                    for (int ch = 0; ch < c; ++ch) {
                        const double g = dfp_n.v[off + ch];
                        dfg_n.v[off + ch] += wi * g;
                        dot += g * fg_n.v[off + ch];
                    }
                }
            dw[i] = dot;
        }

        if (use_psi) {
            std::vector<double> ds = softmax_backward(w, dw);
            std::vector<double> dpooled;
            for (std::size_t i = 0; i < d; ++i) {
                psi.backward(caches[ni].psi_caches[i], ds[i], dpooled, psi_grads[ni]);
                mgap_backward(dpooled, ms[i], dfg_n);
            }
        }

        for (std::size_t k = 0; k < dfg_n.v.size(); ++k)
            dfg.v[dfg.offset(ni, 0, 0) + k] += dfg_n.v[k];
    }

    if (use_psi)
        for (int ni = 0; ni < n; ++ni) psi.apply_grads(psi_grads[ni]);

    backbone.backward(dfg, nullptr);
    return report;
}

Mat PganModel::embed(const Map4& images,
                     const std::vector<const std::vector<PartMask>*>& masks) {
    Map4 fg;
    Map4 fp = forward_maps(images, masks, /*train=*/false, fg, nullptr, nullptr);
    Map4 ff = config.uses_parts() ? fuse_batch(fg, fp) : fg;
    Map4 rf = refine_f.forward(ff, false);
    Mat e_f;
    kernels::gap_forward(rf, e_f);
    return neck.forward(e_f, false);
}

std::vector<PganModel::AttentionInfo> PganModel::attention(
    const Map4& images,
    const std::vector<const std::vector<PartMask>*>& masks) {
    require(config.uses_parts(), "attention: baseline variant has no part branch");
    Map4 fg;
    std::vector<AttentionInfo> info;
    forward_maps(images, masks, /*train=*/false, fg, nullptr, &info);
    return info;
}

std::vector<Param*> PganModel::params() {
    std::vector<Param*> out = backbone.params();
    if (config.uses_psi())
        for (auto* p : psi.params()) out.push_back(p);
    for (auto* p : refine_f.params()) out.push_back(p);
    if (config.uses_parts()) {
        for (auto* p : refine_g.params()) out.push_back(p);
        for (auto* p : refine_p.params()) out.push_back(p);
    }
    out.push_back(&neck.gamma);
    out.push_back(&classifier.fc.weight);
    return out;
}

namespace {
std::string buffer_prefix(const Param& gamma) {
    // "x.gamma" -> "x"
    const auto pos = gamma.name.rfind(".gamma");
    return gamma.name.substr(0, pos);
}
} // namespace

std::vector<std::pair<std::string, std::vector<double>*>>
PganModel::state_entries() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (Param* p : params()) out.emplace_back(p->name, &p->w);

    auto add_bn = [&](BatchNorm2d& bn) {
        const std::string prefix = buffer_prefix(bn.gamma);
        out.emplace_back(prefix + ".running_mean", &bn.running_mean);
        out.emplace_back(prefix + ".running_var", &bn.running_var);
    };
    for (auto& bn : backbone.bns) add_bn(bn);
    add_bn(refine_f.res.bn1);
    add_bn(refine_f.res.bn2);
    if (config.uses_parts()) {
        add_bn(refine_g.res.bn1);
        add_bn(refine_g.res.bn2);
        add_bn(refine_p.res.bn1);
        add_bn(refine_p.res.bn2);
    }
    out.emplace_back("neck.running_mean", &neck.running_mean);
    out.emplace_back("neck.running_var", &neck.running_var);
    return out;
}

void PganModel::mark_statistics_ready() {
    for (auto& bn : backbone.bns) bn.initialized = true;
    neck.initialized = true;
}

} // namespace pgan
