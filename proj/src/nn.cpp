#include "pgan/nn.hpp"

#include <cmath>
#include <numeric>

#include "pgan/errors.hpp"

namespace pgan {

Param::Param(std::string name_, std::vector<int> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    w.assign(n, 0.0);
    g.assign(n, 0.0);
}

void init_fan_in(Param& p, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : p.w) x = rng.uniform(-bound, bound);
}

Conv2d::Conv2d(const std::string& name, int k, int stride, int pad, int ci,
               int co, Rng& rng) {
    shape = kernels::ConvShape{k, stride, pad, ci, co};
    weight = Param(name + ".weight", {k, k, ci, co});
    bias = Param(name + ".bias", {co});
    init_fan_in(weight, k * k * ci, rng);
}

Map4 Conv2d::forward(const Map4& in) {
    cached_in_ = in;
    Map4 out;
    kernels::conv2d_forward(in, shape, weight.w, bias.w, out);
    return out;
}

void Conv2d::backward(const Map4& dout, Map4* din) {
    kernels::conv2d_backward_params(cached_in_, dout, shape, weight.g, bias.g);
    if (din) {
        *din = Map4(cached_in_.n, cached_in_.h, cached_in_.w, cached_in_.c);
        kernels::conv2d_backward_data(dout, shape, weight.w, *din);
    }
}

BatchNorm2d::BatchNorm2d(const std::string& name, int c, double momentum_,
                         double eps_)
    : gamma(name + ".gamma", {c}), beta(name + ".beta", {c}),
      running_mean(c, 0.0), running_var(c, 1.0), momentum(momentum_), eps(eps_) {
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
}

Map4 BatchNorm2d::forward(const Map4& in, bool train) {
    Map4 out;
    if (train) {
        kernels::bn2d_forward_train(in, gamma.w, beta.w, eps, out, xhat_,
                                    save_mean_, save_invstd_);
        for (std::size_t c = 0; c < running_mean.size(); ++c) {
            const double var = 1.0 / (save_invstd_[c] * save_invstd_[c]) - eps;
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * save_mean_[c];
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        }
        initialized = true;
    } else {
        kernels::bn2d_forward_eval(in, gamma.w, beta.w, running_mean, running_var,
                                   eps, out);
    }
    return out;
}

void BatchNorm2d::backward(const Map4& dout, Map4* din) {
    Map4 local;
    Map4& target = din ? *din : local;
    kernels::bn2d_backward(dout, xhat_, gamma.w, save_invstd_, target, gamma.g,
                           beta.g);
}

Map4 ReluLayer::forward(const Map4& in) {
    cached_in_ = in;
    Map4 out;
    kernels::relu_forward(in, out);
    return out;
}

void ReluLayer::backward(const Map4& dout, Map4* din) {
    if (!din) return;
    kernels::relu_backward(cached_in_, dout, *din);
}

Dense::Dense(const std::string& name, int in_dim_, int out_dim_, bool with_bias,
             Rng& rng)
    : has_bias(with_bias), in_dim(in_dim_), out_dim(out_dim_) {
    weight = Param(name + ".weight", {out_dim_, in_dim_});
    init_fan_in(weight, in_dim_, rng);
    if (with_bias) bias = Param(name + ".bias", {out_dim_});
}

Mat Dense::forward(const Mat& in) {
    require(in.cols == in_dim, "Dense: input dimension mismatch");
    cached_in_ = in;
    Mat out(in.rows, out_dim);
    const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int r = 0; r < in.rows; ++r) {
        const double* x = in.row(r);
        double* y = out.row(r);
        for (int j = 0; j < out_dim; ++j) {
            const double* wr = weight.w.data() + static_cast<std::size_t>(j) * in_dim;
            double acc = has_bias ? bias.w[j] : 0.0;
            for (int i = 0; i < in_dim; ++i) acc += wr[i] * x[i];
            y[j] = acc;
        }
    }
    return out;
}

void Dense::backward(const Mat& dout, Mat* din) {
    // parameter grads accumulate serially in row order
    for (int r = 0; r < dout.rows; ++r) {
        const double* dy = dout.row(r);
        const double* x = cached_in_.row(r);
        for (int j = 0; j < out_dim; ++j) {
            double* gw = weight.g.data() + static_cast<std::size_t>(j) * in_dim;
            const double d = dy[j];
            if (d == 0.0) continue;
            for (int i = 0; i < in_dim; ++i) gw[i] += d * x[i];
            if (has_bias) bias.g[j] += d;
        }
    }
    if (din) {
        *din = Mat(dout.rows, in_dim);
        const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
        for (int r = 0; r < dout.rows; ++r) {
            const double* dy = dout.row(r);
            double* dx = din->row(r);
            for (int j = 0; j < out_dim; ++j) {
                const double* wr = weight.w.data() + static_cast<std::size_t>(j) * in_dim;
                const double d = dy[j];
                if (d == 0.0) continue;
                for (int i = 0; i < in_dim; ++i) dx[i] += d * wr[i];
            }
        }
    }
}

} // namespace pgan
