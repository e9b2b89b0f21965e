#include "pgan/pam.hpp"

#include <algorithm>
#include <cmath>

#include "pgan/errors.hpp"

namespace pgan {

void AttentionWeights::validate(double tol) const {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0 && x <= 1.0))
            throw NumericsError("attention weight outside [0,1]");
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol)
        throw NumericsError("attention weights do not sum to 1");
}

AttentionWeights AttentionWeights::uniform(int d) {
    AttentionWeights aw;
    aw.w.assign(d, 1.0 / d);
    return aw;
}

std::vector<double> mgap(const FeatureMap& fi, const PartMask& m) {
    if (fi.h != m.h || fi.w != m.w)
        throw ShapeError("mgap: mask geometry does not match feature map");
    if (m.area < 1) throw ShapeError("mgap: zero-area mask");
    std::vector<double> pooled(fi.c, 0.0);
    for (int y = 0; y < fi.h; ++y)
        for (int x = 0; x < fi.w; ++x) {
            if (!m.at(y, x)) continue;
            const std::size_t off = (static_cast<std::size_t>(y) * fi.w + x) * fi.c;
            for (int c = 0; c < fi.c; ++c) pooled[c] += fi.v[off + c];
        }
    const double inv = 1.0 / m.area;
    for (auto& x : pooled) x *= inv;
    return pooled;
}

void mgap_backward(const std::vector<double>& dpooled, const PartMask& m,
                   FeatureMap& dfi) {
    const double inv = 1.0 / m.area;
    for (int y = 0; y < dfi.h; ++y)
        for (int x = 0; x < dfi.w; ++x) {
            if (!m.at(y, x)) continue;
            const std::size_t off = (static_cast<std::size_t>(y) * dfi.w + x) * dfi.c;
            for (int c = 0; c < dfi.c; ++c) dfi.v[off + c] += dpooled[c] * inv;
        }
}

std::vector<double> softmax(const std::vector<double>& scores) {
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    std::vector<double> w(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        w[i] = std::exp(scores[i] - mx);
        sum += w[i];
    }
    for (auto& x : w) x /= sum;
    return w;
}

std::vector<double> softmax_backward(const std::vector<double>& w,
                                     const std::vector<double>& dw) {
    double inner = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) inner += w[i] * dw[i];
    std::vector<double> ds(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) ds[i] = w[i] * (dw[i] - inner);
    return ds;
}

void Psi::Grads::add_to(Grads& other) const {
    for (std::size_t i = 0; i < direction.size(); ++i)
        other.direction[i] += direction[i];
    for (std::size_t i = 0; i < gain.size(); ++i) {
        other.gain[i] += gain[i];
        other.bias[i] += bias[i];
        other.ln_gamma[i] += ln_gamma[i];
        other.ln_beta[i] += ln_beta[i];
    }
}

Psi::Psi(const std::string& name, int c, Rng& rng)
    : direction(name + ".direction", {c, c}), gain(name + ".gain", {c}),
      bias(name + ".bias", {c}), ln_gamma(name + ".ln_gamma", {c}),
      ln_beta(name + ".ln_beta", {c}), channels(c) {
    init_fan_in(direction, c, rng);
    std::fill(gain.w.begin(), gain.w.end(), 1.0);
    // small LN gain keeps the initial scores close together, so training
    // starts from near-uniform attention and differentiates gradually
    std::fill(ln_gamma.w.begin(), ln_gamma.w.end(), 0.05);
}

double Psi::forward(const std::vector<double>& v, Cache* cache) const {
    const int c = channels;
    require(static_cast<int>(v.size()) == c, "psi: input dimension mismatch");

    std::vector<double> dot(c), norm(c), y(c);
    for (int j = 0; j < c; ++j) {
        const double* row = direction.w.data() + static_cast<std::size_t>(j) * c;
        double d = 0.0, n2 = 0.0;
        for (int i = 0; i < c; ++i) {
            d += row[i] * v[i];
            n2 += row[i] * row[i];
        }
        dot[j] = d;
        norm[j] = n2 > 0.0 ? std::sqrt(n2) : 1.0; // degenerate zero row
        y[j] = gain.w[j] * d / norm[j] + bias.w[j];
    }

    double mean = 0.0;
    for (double x : y) mean += x;
    mean /= c;
    double var = 0.0;
    for (double x : y) var += (x - mean) * (x - mean);
    var /= c;
    const double invstd = 1.0 / std::sqrt(var + ln_eps);

    std::vector<double> xhat(c), post(c);
    double out = 0.0;
    for (int j = 0; j < c; ++j) {
        xhat[j] = (y[j] - mean) * invstd;
        post[j] = ln_gamma.w[j] * xhat[j] + ln_beta.w[j];
        out += post[j] > 0.0 ? post[j] : 0.0;
    }
    out /= c;

    if (cache) {
        cache->input = v;
        cache->dot = std::move(dot);
        cache->norm = std::move(norm);
        cache->ln_xhat = std::move(xhat);
        cache->post_ln = std::move(post);
        cache->ln_invstd = invstd;
    }
    return out;
}

void Psi::backward(const Cache& cache, double ds, std::vector<double>& dv,
                   Grads& grads) const {
    const int c = channels;
    dv.assign(c, 0.0);

    // mean + relu
    std::vector<double> dpost(c);
    const double dmean = ds / c;
    for (int j = 0; j < c; ++j)
        dpost[j] = cache.post_ln[j] > 0.0 ? dmean : 0.0;

    // layer norm affine
    std::vector<double> dxhat(c);
    for (int j = 0; j < c; ++j) {
        grads.ln_gamma[j] += dpost[j] * cache.ln_xhat[j];
        grads.ln_beta[j] += dpost[j];
        dxhat[j] = dpost[j] * ln_gamma.w[j];
    }

    // layer norm statistics
    double m1 = 0.0, m2 = 0.0;
    for (int j = 0; j < c; ++j) {
        m1 += dxhat[j];
        m2 += dxhat[j] * cache.ln_xhat[j];
    }
    m1 /= c;
    m2 /= c;
    std::vector<double> dy(c);
    for (int j = 0; j < c; ++j)
        dy[j] = cache.ln_invstd * (dxhat[j] - m1 - cache.ln_xhat[j] * m2);

    // weight-normalized FC
    for (int j = 0; j < c; ++j) {
        const double* row = direction.w.data() + static_cast<std::size_t>(j) * c;
        double* drow = grads.direction.data() + static_cast<std::size_t>(j) * c;
        const double n = cache.norm[j];
        const double gj = gain.w[j];
        const double dyj = dy[j];
        grads.gain[j] += dyj * cache.dot[j] / n;
        grads.bias[j] += dyj;
        const double a = dyj * gj / n;
        const double b = dyj * gj * cache.dot[j] / (n * n * n);
        for (int i = 0; i < c; ++i) {
            drow[i] += a * cache.input[i] - b * row[i];
            dv[i] += a * row[i];
        }
    }
}

void Psi::apply_grads(const Grads& grads) {
    for (std::size_t i = 0; i < direction.g.size(); ++i)
        direction.g[i] += grads.direction[i];
    for (int j = 0; j < channels; ++j) {
        gain.g[j] += grads.gain[j];
        bias.g[j] += grads.bias[j];
        ln_gamma.g[j] += grads.ln_gamma[j];
        ln_beta.g[j] += grads.ln_beta[j];
    }
}

std::vector<Param*> Psi::params() {
    return {&direction, &gain, &bias, &ln_gamma, &ln_beta};
}

AttentionWeights attention_weights(const std::vector<std::vector<double>>& pooled,
                                   const Psi& psi) {
    if (pooled.empty()) throw ShapeError("attention_weights: need at least one part");
    std::vector<double> scores(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) scores[i] = psi.value(pooled[i]);
    AttentionWeights aw;
    aw.w = softmax(scores);
    return aw;
}

FeatureMap compose_part_feature(const FeatureMap& fg,
                                const std::vector<FeatureMap>& parts,
                                const AttentionWeights& w) {
    if (parts.size() != w.w.size())
        throw ShapeError("compose_part_feature: weight/part count mismatch");
    for (const auto& p : parts)
        if (!p.same_geometry(fg))
            throw ShapeError("compose_part_feature: geometry mismatch");

    FeatureMap out(fg.h, fg.w, fg.c, fg.src_h, fg.src_w);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const double wi = w.w[i];
        for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += wi * parts[i].v[k];
    }
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += fg.v[k];
    return out;
}

std::vector<std::uint8_t> pam_heatmap(const FeatureMap& fp) {
    const std::size_t cells = static_cast<std::size_t>(fp.h) * fp.w;
    std::vector<double> mean(cells, 0.0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const double* row = fp.v.data() + cell * fp.c;
        double acc = 0.0;
        for (int c = 0; c < fp.c; ++c) acc += row[c];
        mean[cell] = acc / fp.c;
    }
    const auto [mn_it, mx_it] = std::minmax_element(mean.begin(), mean.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<std::uint8_t> out(cells, 0);
    if (mx > mn) {
        const double scale = 255.0 / (mx - mn);
        for (std::size_t i = 0; i < cells; ++i)
            out[i] = static_cast<std::uint8_t>(std::lround((mean[i] - mn) * scale));
    }
    return out;
}

} // namespace pgan
