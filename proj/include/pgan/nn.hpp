#pragma once

#include <string>
#include <vector>

#include "pgan/kernels.hpp"
#include "pgan/rng.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

/// One named parameter tensor with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> w;
    std::vector<double> g;
    double lr_scale = 1.0; // per-group learning-rate multiplier

    Param() = default;
    Param(std::string name_, std::vector<int> shape_);
    std::size_t numel() const { return w.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

/// Symmetric uniform fan-in initialization, U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_fan_in(Param& p, int fan_in, Rng& rng);

/// Non-learned per-layer state (batch-norm running statistics) that still
/// travels with checkpoints.
struct Buffer {
    std::string name;
    std::vector<double> v;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int k, int stride, int pad, int ci, int co,
           Rng& rng);

    Map4 forward(const Map4& in);
    /// Accumulates parameter gradients; fills din when non-null.
    void backward(const Map4& dout, Map4* din);

    kernels::ConvShape shape;
    Param weight, bias;

private:
    Map4 cached_in_;
};

class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(const std::string& name, int c, double momentum = 0.1,
                double eps = 1e-5);

    Map4 forward(const Map4& in, bool train);
    void backward(const Map4& dout, Map4* din);

    Param gamma, beta;
    std::vector<double> running_mean, running_var;
    bool initialized = false;
    double momentum = 0.1, eps = 1e-5;

private:
    Map4 xhat_;
    std::vector<double> save_mean_, save_invstd_;
};

class ReluLayer {
public:
    Map4 forward(const Map4& in);
    void backward(const Map4& dout, Map4* din);

private:
    Map4 cached_in_;
};

/// Plain fully-connected y = W x + b on rows of a Mat.
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, int in_dim, int out_dim, bool with_bias,
          Rng& rng);

    Mat forward(const Mat& in);
    void backward(const Mat& dout, Mat* din);

    Param weight; // (out_dim, in_dim)
    Param bias;   // empty when bias-free
    bool has_bias = true;
    int in_dim = 0, out_dim = 0;

private:
    Mat cached_in_;
};

} // namespace pgan
