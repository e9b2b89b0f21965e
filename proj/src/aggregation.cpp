#include "pgan/aggregation.hpp"

#include <cmath>

#include "pgan/errors.hpp"

namespace pgan {

std::string role_name(EmbedRole role) {
    switch (role) {
        case EmbedRole::global_c: return "global";
        case EmbedRole::part_c: return "part";
        case EmbedRole::fused_2c: return "fused";
        case EmbedRole::fused_bn: return "fused_bn";
    }
    return "?";
}

FeatureMap fuse(const FeatureMap& fg, const FeatureMap& fp) {
    if (fg.h != fp.h || fg.w != fp.w)
        throw ShapeError("fuse: spatial geometry mismatch");
    FeatureMap out(fg.h, fg.w, fg.c + fp.c, fg.src_h, fg.src_w);
    for (int y = 0; y < fg.h; ++y)
        for (int x = 0; x < fg.w; ++x) {
            for (int c = 0; c < fg.c; ++c) out.at(y, x, c) = fg.at(y, x, c);
            for (int c = 0; c < fp.c; ++c) out.at(y, x, fg.c + c) = fp.at(y, x, c);
        }
    return out;
}

void split_fused(const FeatureMap& fused, FeatureMap& a, FeatureMap& b) {
    require(fused.c % 2 == 0, "split_fused: odd channel count");
    const int half = fused.c / 2;
    a = FeatureMap(fused.h, fused.w, half, fused.src_h, fused.src_w);
    b = FeatureMap(fused.h, fused.w, half, fused.src_h, fused.src_w);
    for (int y = 0; y < fused.h; ++y)
        for (int x = 0; x < fused.w; ++x)
            for (int c = 0; c < half; ++c) {
                a.at(y, x, c) = fused.at(y, x, c);
                b.at(y, x, c) = fused.at(y, x, half + c);
            }
}

Map4 fuse_batch(const Map4& a, const Map4& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "fuse_batch: shape mismatch");
    Map4 out(a.n, a.h, a.w, a.c + b.c);
    const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < a.n; ++ni)
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                double* orow = out.v.data() + out.offset(ni, y, x);
                const double* ar = a.v.data() + a.offset(ni, y, x);
                const double* br = b.v.data() + b.offset(ni, y, x);
                for (int c = 0; c < a.c; ++c) orow[c] = ar[c];
                for (int c = 0; c < b.c; ++c) orow[a.c + c] = br[c];
            }
    return out;
}

Embedding gap(const FeatureMap& f, EmbedRole role) {
    Embedding e;
    e.role = role;
    e.v.assign(f.c, 0.0);
    for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x)
            for (int c = 0; c < f.c; ++c) e.v[c] += f.at(y, x, c);
    const double inv = 1.0 / (static_cast<double>(f.h) * f.w);
    for (auto& x : e.v) x *= inv;
    return e;
}

SEBlock::SEBlock(const std::string& name, int c, int reduction, Rng& rng)
    : channels(c) {
    const int mid = std::max(1, c / reduction);
    fc1 = Dense(name + ".fc1", c, mid, true, rng);
    fc2 = Dense(name + ".fc2", mid, c, true, rng);
}

Map4 SEBlock::forward(const Map4& in) {
    cached_in_ = in;
    kernels::gap_forward(in, squeeze_);
    Mat h = fc1.forward(squeeze_);
    hidden_ = Mat(h.rows, h.cols);
    for (std::size_t i = 0; i < h.v.size(); ++i)
        hidden_.v[i] = h.v[i] > 0.0 ? h.v[i] : 0.0;
    Mat z = fc2.forward(hidden_);
    gate_ = Mat(z.rows, z.cols);
    for (std::size_t i = 0; i < z.v.size(); ++i)
        gate_.v[i] = 1.0 / (1.0 + std::exp(-z.v[i]));

    Map4 out(in.n, in.h, in.w, in.c);
    const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < in.n; ++ni) {
        const double* g = gate_.row(ni);
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const std::size_t off = in.offset(ni, y, x);
                for (int c = 0; c < in.c; ++c) out.v[off + c] = in.v[off + c] * g[c];
            }
    }
    return out;
}

void SEBlock::backward(const Map4& dout, Map4* din) {
    const Map4& in = cached_in_;
    Mat dgate(gate_.rows, gate_.cols);
    const bool par = kernels::parallel_enabled();

#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < in.n; ++ni) {
        double* dgr = dgate.row(ni);
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const std::size_t off = in.offset(ni, y, x);
                for (int c = 0; c < in.c; ++c) dgr[c] += dout.v[off + c] * in.v[off + c];
            }
    }

    // sigmoid derivative
    Mat dz(gate_.rows, gate_.cols);
    for (std::size_t i = 0; i < dz.v.size(); ++i)
        dz.v[i] = dgate.v[i] * gate_.v[i] * (1.0 - gate_.v[i]);

    Mat dhidden;
    fc2.backward(dz, &dhidden);
    for (std::size_t i = 0; i < dhidden.v.size(); ++i)
        if (hidden_.v[i] <= 0.0) dhidden.v[i] = 0.0;
    Mat dsqueeze;
    fc1.backward(dhidden, &dsqueeze);

    if (!din) return;
    *din = Map4(in.n, in.h, in.w, in.c);
    const double inv_hw = 1.0 / (static_cast<double>(in.h) * in.w);
#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < in.n; ++ni) {
        const double* g = gate_.row(ni);
        const double* dsq = dsqueeze.row(ni);
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const std::size_t off = in.offset(ni, y, x);
                for (int c = 0; c < in.c; ++c)
                    din->v[off + c] = dout.v[off + c] * g[c] + dsq[c] * inv_hw;
            }
    }
}

ResidualBlock::ResidualBlock(const std::string& name, int ci, int co, Rng& rng)
    : conv1(name + ".conv1", 1, 1, 0, ci, co, rng),
      conv2(name + ".conv2", 3, 1, 1, co, co, rng),
      shortcut(name + ".shortcut", 1, 1, 0, ci, co, rng),
      bn1(name + ".bn1", co), bn2(name + ".bn2", co) {}

Map4 ResidualBlock::forward(const Map4& in, bool train) {
    Map4 t = conv1.forward(in);
    t = bn1.forward(t, train);
    t = relu.forward(t);
    t = conv2.forward(t);
    t = bn2.forward(t, train);
    Map4 sc = shortcut.forward(in);
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += sc.v[i];
    return t;
}

void ResidualBlock::backward(const Map4& dout, Map4* din) {
    Map4 d = dout, tmp;
    bn2.backward(d, &tmp);
    conv2.backward(tmp, &d);
    relu.backward(d, &tmp);
    bn1.backward(tmp, &d);
    Map4 din_branch;
    conv1.backward(d, din ? &din_branch : nullptr);
    Map4 din_shortcut;
    shortcut.backward(dout, din ? &din_shortcut : nullptr);
    if (din) {
        *din = din_branch;
        for (std::size_t i = 0; i < din->v.size(); ++i)
            din->v[i] += din_shortcut.v[i];
    }
}

Refine::Refine(const std::string& name, int ci, int co, int reduction, Rng& rng)
    : se(name + ".se", ci, reduction, rng), res(name + ".res", ci, co, rng) {}

Map4 Refine::forward(const Map4& in, bool train) {
    return res.forward(se.forward(in), train);
}

void Refine::backward(const Map4& dout, Map4* din) {
    Map4 dmid;
    res.backward(dout, &dmid);
    se.backward(dmid, din);
}

std::vector<Param*> Refine::params() {
    return {&se.fc1.weight, &se.fc1.bias, &se.fc2.weight, &se.fc2.bias,
            &res.conv1.weight, &res.conv1.bias, &res.bn1.gamma, &res.bn1.beta,
            &res.conv2.weight, &res.conv2.bias, &res.bn2.gamma, &res.bn2.beta,
            &res.shortcut.weight, &res.shortcut.bias};
}

BNNeck::BNNeck(const std::string& name, int dim_, double momentum_, double eps_)
    : gamma(name + ".gamma", {dim_}), running_mean(dim_, 0.0),
      running_var(dim_, 1.0), momentum(momentum_), eps(eps_), dim(dim_) {
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
}

Mat BNNeck::forward(const Mat& in, bool train) {
    require(in.cols == dim, "bn_neck: dimension mismatch");
    Mat out(in.rows, in.cols);
    if (train) {
        xhat_ = Mat(in.rows, in.cols);
        save_invstd_.assign(dim, 0.0);
        const double inv_n = 1.0 / in.rows;
        for (int c = 0; c < dim; ++c) {
            double sum = 0.0;
            for (int r = 0; r < in.rows; ++r) sum += in.at(r, c);
            const double mean = sum * inv_n;
            double sq = 0.0;
            for (int r = 0; r < in.rows; ++r) {
                const double d = in.at(r, c) - mean;
                sq += d * d;
            }
            const double var = sq * inv_n;
            const double invstd = 1.0 / std::sqrt(var + eps);
            save_invstd_[c] = invstd;
            for (int r = 0; r < in.rows; ++r) {
                const double xh = (in.at(r, c) - mean) * invstd;
                xhat_.at(r, c) = xh;
                out.at(r, c) = gamma.w[c] * xh;
            }
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        }
        initialized = true;
    } else {
        if (!initialized)
            throw NumericsError(
                "bn_neck: inference requested before any training statistics exist");
        for (int c = 0; c < dim; ++c) {
            const double invstd = 1.0 / std::sqrt(running_var[c] + eps);
            const double scale = gamma.w[c] * invstd;
            const double shift = -running_mean[c] * scale;
            for (int r = 0; r < in.rows; ++r)
                out.at(r, c) = in.at(r, c) * scale + shift;
        }
    }
    return out;
}

void BNNeck::backward(const Mat& dout, Mat* din) {
    const int n = dout.rows;
    const double inv_n = 1.0 / n;
    if (din) *din = Mat(n, dim);
    for (int c = 0; c < dim; ++c) {
        double s1 = 0.0, s2 = 0.0;
        for (int r = 0; r < n; ++r) {
            s1 += dout.at(r, c);
            s2 += dout.at(r, c) * xhat_.at(r, c);
        }
        gamma.g[c] += s2;
        if (din) {
            const double g = gamma.w[c] * save_invstd_[c];
            for (int r = 0; r < n; ++r)
                din->at(r, c) =
                    g * (dout.at(r, c) - inv_n * s1 - xhat_.at(r, c) * inv_n * s2);
        }
    }
}

} // namespace pgan
