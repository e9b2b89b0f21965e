#pragma once

// Naive single-threaded reference implementations of the production kernels.
// Each mirrors the per-output accumulation order of the production code, so
// tests can require bit-identical results while keeping the logic here
// independent and obviously correct.

#include <cmath>
#include <vector>

#include "pgan/kernels.hpp"
#include "pgan/tensor.hpp"

namespace refk {

inline pgan::Map4 conv2d(const pgan::Map4& in, const pgan::kernels::ConvShape& cs,
                         const std::vector<double>& weight,
                         const std::vector<double>& bias) {
    const int ho = cs.out_dim(in.h), wo = cs.out_dim(in.w);
    pgan::Map4 out(in.n, ho, wo, cs.co);
    for (int ni = 0; ni < in.n; ++ni)
        for (int yo = 0; yo < ho; ++yo)
            for (int xo = 0; xo < wo; ++xo)
                for (int co = 0; co < cs.co; ++co) {
                    double acc = bias[co];
                    for (int ky = 0; ky < cs.k; ++ky)
                        for (int kx = 0; kx < cs.k; ++kx) {
                            const int yi = yo * cs.stride + ky - cs.pad;
                            const int xi = xo * cs.stride + kx - cs.pad;
                            if (yi < 0 || yi >= in.h || xi < 0 || xi >= in.w) continue;
                            for (int ci = 0; ci < cs.ci; ++ci)
                                acc += in.at(ni, yi, xi, ci) *
                                       weight[((static_cast<std::size_t>(ky) * cs.k + kx) *
                                                   cs.ci +
                                               ci) *
                                                  cs.co +
                                              co];
                        }
                    out.at(ni, yo, xo, co) = acc;
                }
    return out;
}

inline pgan::Map4 bn2d_train(const pgan::Map4& in, const std::vector<double>& gamma,
                             const std::vector<double>& beta, double eps) {
    const int c = in.c;
    const std::size_t m = static_cast<std::size_t>(in.n) * in.h * in.w;
    pgan::Map4 out(in.n, in.h, in.w, c);
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) sum += in.v[i * c + ch];
        const double mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = in.v[i * c + ch] - mean;
            sq += d * d;
        }
        const double invstd = 1.0 / std::sqrt(sq / static_cast<double>(m) + eps);
        for (std::size_t i = 0; i < m; ++i)
            out.v[i * c + ch] =
                gamma[ch] * ((in.v[i * c + ch] - mean) * invstd) + beta[ch];
    }
    return out;
}

inline pgan::Mat gap(const pgan::Map4& in) {
    pgan::Mat out(in.n, in.c);
    for (int ni = 0; ni < in.n; ++ni) {
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x)
                for (int ch = 0; ch < in.c; ++ch)
                    out.at(ni, ch) += in.at(ni, y, x, ch);
        for (int ch = 0; ch < in.c; ++ch)
            out.at(ni, ch) *= 1.0 / (static_cast<double>(in.h) * in.w);
    }
    return out;
}

inline double euclid(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc);
}

inline double cosine_dist(const double* a, const double* b, int d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < d; ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace refk
