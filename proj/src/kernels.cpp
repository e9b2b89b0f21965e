#include "pgan/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "pgan/errors.hpp"

namespace pgan::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

void conv2d_forward(const Map4& in, const ConvShape& cs,
                    const std::vector<double>& weight,
                    const std::vector<double>& bias, Map4& out) {
    require(in.c == cs.ci, "conv2d_forward: channel mismatch");
    require(weight.size() == cs.weight_count(), "conv2d_forward: weight size");
    const int ho = cs.out_dim(in.h), wo = cs.out_dim(in.w);
    out = Map4(in.n, ho, wo, cs.co);
    const bool par = parallel_enabled();
    const int k = cs.k, s = cs.stride, p = cs.pad, ci = cs.ci, co = cs.co;

#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int ni = 0; ni < in.n; ++ni) {
        for (int yo = 0; yo < ho; ++yo) {
            for (int xo = 0; xo < wo; ++xo) {
                double* orow = out.v.data() + out.offset(ni, yo, xo);
                for (int j = 0; j < co; ++j) orow[j] = bias[j];
                for (int ky = 0; ky < k; ++ky) {
                    const int yi = yo * s + ky - p;
                    if (yi < 0 || yi >= in.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int xi = xo * s + kx - p;
                        if (xi < 0 || xi >= in.w) continue;
                        const double* irow = in.v.data() + in.offset(ni, yi, xi);
                        const double* wrow =
                            weight.data() + static_cast<std::size_t>(ky * k + kx) * ci * co;
                        for (int ic = 0; ic < ci; ++ic) {
                            const double xv = irow[ic];
                            const double* w2 = wrow + static_cast<std::size_t>(ic) * co;
                            for (int j = 0; j < co; ++j) orow[j] += xv * w2[j];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_data(const Map4& dout, const ConvShape& cs,
                          const std::vector<double>& weight, Map4& din) {
    const int k = cs.k, s = cs.stride, p = cs.pad, ci = cs.ci, co = cs.co;
    const int ho = dout.h, wo = dout.w;
    const bool par = parallel_enabled();

    // tap-transposed weights (ky,kx,co,ci) so the inner update runs over
    // contiguous ci rows
    std::vector<double> wt(weight.size());
    for (int t = 0; t < k * k; ++t) {
        const double* src = weight.data() + static_cast<std::size_t>(t) * ci * co;
        double* dst = wt.data() + static_cast<std::size_t>(t) * ci * co;
        for (int ic = 0; ic < ci; ++ic)
            for (int j = 0; j < co; ++j)
                dst[static_cast<std::size_t>(j) * ci + ic] =
                    src[static_cast<std::size_t>(ic) * co + j];
    }

#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int ni = 0; ni < din.n; ++ni) {
        for (int yi = 0; yi < din.h; ++yi) {
            for (int xi = 0; xi < din.w; ++xi) {
                double* drow = din.v.data() + din.offset(ni, yi, xi);
                for (int ic = 0; ic < ci; ++ic) drow[ic] = 0.0;
                for (int ky = 0; ky < k; ++ky) {
                    const int ynum = yi + p - ky;
                    if (ynum < 0 || ynum % s != 0) continue;
                    const int yo = ynum / s;
                    if (yo >= ho) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int xnum = xi + p - kx;
                        if (xnum < 0 || xnum % s != 0) continue;
                        const int xo = xnum / s;
                        if (xo >= wo) continue;
                        const double* grow = dout.v.data() + dout.offset(ni, yo, xo);
                        const double* wtap =
                            wt.data() + static_cast<std::size_t>(ky * k + kx) * ci * co;
                        for (int j = 0; j < co; ++j) {
                            const double g = grow[j];
                            if (g == 0.0) continue;
                            const double* w2 = wtap + static_cast<std::size_t>(j) * ci;
                            for (int ic = 0; ic < ci; ++ic) drow[ic] += g * w2[ic];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const Map4& in, const Map4& dout,
                            const ConvShape& cs, std::vector<double>& dweight,
                            std::vector<double>& dbias) {
    const int k = cs.k, s = cs.stride, p = cs.pad, ci = cs.ci, co = cs.co;
    const int ho = dout.h, wo = dout.w;
    const bool par = parallel_enabled();

    // one (ky,kx) tap per iteration: a single streaming pass over in/dout
    // accumulating the tap's (ci x co) weight block, which stays cache-hot
#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
            double* wblock =
                dweight.data() + static_cast<std::size_t>(ky * k + kx) * ci * co;
            for (int ni = 0; ni < in.n; ++ni)
                for (int yo = 0; yo < ho; ++yo) {
                    const int yi = yo * s + ky - p;
                    if (yi < 0 || yi >= in.h) continue;
                    for (int xo = 0; xo < wo; ++xo) {
                        const int xi = xo * s + kx - p;
                        if (xi < 0 || xi >= in.w) continue;
                        const double* irow = in.v.data() + in.offset(ni, yi, xi);
                        const double* grow = dout.v.data() + dout.offset(ni, yo, xo);
                        for (int ic = 0; ic < ci; ++ic) {
                            const double xv = irow[ic];
                            if (xv == 0.0) continue;
                            double* wrow = wblock + static_cast<std::size_t>(ic) * co;
                            for (int j = 0; j < co; ++j) wrow[j] += xv * grow[j];
                        }
                    }
                }
        }
    }

    for (int ni = 0; ni < dout.n; ++ni)
        for (int yo = 0; yo < ho; ++yo)
            for (int xo = 0; xo < wo; ++xo) {
                const double* grow = dout.v.data() + dout.offset(ni, yo, xo);
                for (int j = 0; j < co; ++j) dbias[j] += grow[j];
            }
}

namespace {
constexpr int kChanBlock = 8; // one cache line of doubles

// Per-channel sums taken channel-block by channel-block: each block's sums
// run over cells in ascending order inside one thread, so results do not
// depend on the thread count.
template <typename Accum>
void blocked_channel_pass(int c, std::size_t m, bool par, Accum&& accum) {
    const int blocks = (c + kChanBlock - 1) / kChanBlock;
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < blocks; ++b) {
        const int c0 = b * kChanBlock;
        const int c1 = std::min(c, c0 + kChanBlock);
        accum(c0, c1, m);
    }
}
} // namespace

void bn2d_forward_train(const Map4& in, const std::vector<double>& gamma,
                        const std::vector<double>& beta, double eps, Map4& out,
                        Map4& xhat, std::vector<double>& save_mean,
                        std::vector<double>& save_invstd) {
    const int c = in.c;
    const std::size_t m = static_cast<std::size_t>(in.n) * in.h * in.w;
    out = Map4(in.n, in.h, in.w, c);
    xhat = Map4(in.n, in.h, in.w, c);
    save_mean.assign(c, 0.0);
    save_invstd.assign(c, 0.0);
    const bool par = parallel_enabled();

    std::vector<double> sums(c, 0.0);
    blocked_channel_pass(c, m, par, [&](int c0, int c1, std::size_t cells) {
        for (std::size_t i = 0; i < cells; ++i) {
            const double* row = in.v.data() + i * c;
            for (int ch = c0; ch < c1; ++ch) sums[ch] += row[ch];
        }
    });
    for (int ch = 0; ch < c; ++ch) save_mean[ch] = sums[ch] / static_cast<double>(m);

    std::vector<double> sq(c, 0.0);
    blocked_channel_pass(c, m, par, [&](int c0, int c1, std::size_t cells) {
        for (std::size_t i = 0; i < cells; ++i) {
            const double* row = in.v.data() + i * c;
            for (int ch = c0; ch < c1; ++ch) {
                const double d = row[ch] - save_mean[ch];
                sq[ch] += d * d;
            }
        }
    });
    for (int ch = 0; ch < c; ++ch)
        save_invstd[ch] = 1.0 / std::sqrt(sq[ch] / static_cast<double>(m) + eps);

    const long cells = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < cells; ++i) {
        const double* row = in.v.data() + static_cast<std::size_t>(i) * c;
        double* xrow = xhat.v.data() + static_cast<std::size_t>(i) * c;
        double* orow = out.v.data() + static_cast<std::size_t>(i) * c;
        for (int ch = 0; ch < c; ++ch) {
            const double xh = (row[ch] - save_mean[ch]) * save_invstd[ch];
            xrow[ch] = xh;
            orow[ch] = gamma[ch] * xh + beta[ch];
        }
    }
}

void bn2d_forward_eval(const Map4& in, const std::vector<double>& gamma,
                       const std::vector<double>& beta,
                       const std::vector<double>& running_mean,
                       const std::vector<double>& running_var, double eps,
                       Map4& out) {
    const int c = in.c;
    const long cells = static_cast<long>(in.numel() / c);
    out = Map4(in.n, in.h, in.w, c);
    const bool par = parallel_enabled();

    std::vector<double> scale(c), shift(c);
    for (int ch = 0; ch < c; ++ch) {
        const double invstd = 1.0 / std::sqrt(running_var[ch] + eps);
        scale[ch] = gamma[ch] * invstd;
        shift[ch] = beta[ch] - running_mean[ch] * scale[ch];
    }
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < cells; ++i) {
        const double* row = in.v.data() + static_cast<std::size_t>(i) * c;
        double* orow = out.v.data() + static_cast<std::size_t>(i) * c;
        for (int ch = 0; ch < c; ++ch) orow[ch] = row[ch] * scale[ch] + shift[ch];
    }
}

void bn2d_backward(const Map4& dout, const Map4& xhat,
                   const std::vector<double>& gamma,
                   const std::vector<double>& save_invstd, Map4& din,
                   std::vector<double>& dgamma, std::vector<double>& dbeta) {
    const int c = dout.c;
    const std::size_t m = static_cast<std::size_t>(dout.n) * dout.h * dout.w;
    din = Map4(dout.n, dout.h, dout.w, c);
    const bool par = parallel_enabled();
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<double> s1(c, 0.0), s2(c, 0.0);
    blocked_channel_pass(c, m, par, [&](int c0, int c1, std::size_t cells) {
        for (std::size_t i = 0; i < cells; ++i) {
            const double* drow = dout.v.data() + i * c;
            const double* xrow = xhat.v.data() + i * c;
            for (int ch = c0; ch < c1; ++ch) {
                s1[ch] += drow[ch];
                s2[ch] += drow[ch] * xrow[ch];
            }
        }
    });
    for (int ch = 0; ch < c; ++ch) {
        dgamma[ch] += s2[ch];
        dbeta[ch] += s1[ch];
    }

    std::vector<double> g(c), a1(c), a2(c);
    for (int ch = 0; ch < c; ++ch) {
        g[ch] = gamma[ch] * save_invstd[ch];
        a1[ch] = inv_m * s1[ch];
        a2[ch] = inv_m * s2[ch];
    }
    const long cells = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < cells; ++i) {
        const double* drow = dout.v.data() + static_cast<std::size_t>(i) * c;
        const double* xrow = xhat.v.data() + static_cast<std::size_t>(i) * c;
        double* orow = din.v.data() + static_cast<std::size_t>(i) * c;
        for (int ch = 0; ch < c; ++ch)
            orow[ch] = g[ch] * (drow[ch] - a1[ch] - xrow[ch] * a2[ch]);
    }
}

void relu_forward(const Map4& in, Map4& out) {
    out = Map4(in.n, in.h, in.w, in.c);
    const bool par = parallel_enabled();
    const long total = static_cast<long>(in.numel());
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < total; ++i)
        out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
}

void relu_backward(const Map4& in, const Map4& dout, Map4& din) {
    din = Map4(in.n, in.h, in.w, in.c);
    const bool par = parallel_enabled();
    const long total = static_cast<long>(in.numel());
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < total; ++i)
        din.v[i] = in.v[i] > 0.0 ? dout.v[i] : 0.0;
}

void gap_forward(const Map4& in, Mat& out) {
    out = Mat(in.n, in.c);
    const double inv = 1.0 / (static_cast<double>(in.h) * in.w);
    const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < in.n; ++ni) {
        double* orow = out.row(ni);
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const double* irow = in.v.data() + in.offset(ni, y, x);
                for (int ch = 0; ch < in.c; ++ch) orow[ch] += irow[ch];
            }
        for (int ch = 0; ch < in.c; ++ch) orow[ch] *= inv;
    }
}

void gap_backward(const Mat& dout, int h, int w, Map4& din) {
    din = Map4(dout.rows, h, w, dout.cols);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int ni = 0; ni < dout.rows; ++ni) {
        const double* grow = dout.row(ni);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double* drow = din.v.data() + din.offset(ni, y, x);
                for (int ch = 0; ch < dout.cols; ++ch) drow[ch] = grow[ch] * inv;
            }
    }
}

void pairwise_rows(const Mat& q, const Mat& g, bool metric_cosine, Mat& out) {
    require(q.cols == g.cols, "pairwise_rows: dimension mismatch");
    out = Mat(q.rows, g.rows);
    const int d = q.cols;
    const bool par = parallel_enabled();

    if (!metric_cosine) {
#pragma omp parallel for schedule(static) if (par)
        for (int i = 0; i < q.rows; ++i) {
            const double* qr = q.row(i);
            double* orow = out.row(i);
            for (int j = 0; j < g.rows; ++j) {
                const double* gr = g.row(j);
                double acc = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double diff = qr[k] - gr[k];
                    acc += diff * diff;
                }
                orow[j] = std::sqrt(acc);
            }
        }
        return;
    }

    std::vector<double> qn(q.rows), gn(g.rows);
    for (int i = 0; i < q.rows; ++i) {
        double acc = 0.0;
        const double* r = q.row(i);
        for (int k = 0; k < d; ++k) acc += r[k] * r[k];
        qn[i] = std::sqrt(acc);
        if (qn[i] == 0.0)
            throw NumericsError("cosine distance: zero-norm query vector at index " +
                                std::to_string(i));
    }
    for (int j = 0; j < g.rows; ++j) {
        double acc = 0.0;
        const double* r = g.row(j);
        for (int k = 0; k < d; ++k) acc += r[k] * r[k];
        gn[j] = std::sqrt(acc);
        if (gn[j] == 0.0)
            throw NumericsError("cosine distance: zero-norm gallery vector at index " +
                                std::to_string(j));
    }

#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < q.rows; ++i) {
        const double* qr = q.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < g.rows; ++j) {
            const double* gr = g.row(j);
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += qr[k] * gr[k];
            orow[j] = 1.0 - dot / (qn[i] * gn[j]);
        }
    }
}

} // namespace pgan::kernels
