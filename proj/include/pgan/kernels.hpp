#pragma once

#include <vector>

#include "pgan/tensor.hpp"

// Data-parallel inner loops shared by the layers. Every kernel is written so
// each parallel iteration owns a disjoint slice of the output and every
// floating-point reduction runs in a fixed serial order inside one thread.
// Results are therefore bit-identical for any thread count, and identical to
// the serial path toggled by set_parallel(false). tests/ keeps an independent
// naive reference for each kernel; tools/pgan_bench compares timings.

namespace pgan::kernels {

void set_parallel(bool on);
bool parallel_enabled();

struct ConvShape {
    int k = 3;       // square kernel
    int stride = 1;
    int pad = 1;
    int ci = 0;
    int co = 0;

    int out_dim(int in_dim) const { return (in_dim + 2 * pad - k) / stride + 1; }
    std::size_t weight_count() const {
        return static_cast<std::size_t>(k) * k * ci * co;
    }
};

// weight layout (ky, kx, ci, co) with co contiguous
void conv2d_forward(const Map4& in, const ConvShape& cs,
                    const std::vector<double>& weight,
                    const std::vector<double>& bias, Map4& out);

void conv2d_backward_data(const Map4& dout, const ConvShape& cs,
                          const std::vector<double>& weight, Map4& din);

void conv2d_backward_params(const Map4& in, const Map4& dout,
                            const ConvShape& cs, std::vector<double>& dweight,
                            std::vector<double>& dbias);

// Per-channel batch statistics over (n, y, x). save_mean/save_invstd hold the
// batch statistics the backward pass needs.
void bn2d_forward_train(const Map4& in, const std::vector<double>& gamma,
                        const std::vector<double>& beta, double eps, Map4& out,
                        Map4& xhat, std::vector<double>& save_mean,
                        std::vector<double>& save_invstd);

void bn2d_forward_eval(const Map4& in, const std::vector<double>& gamma,
                       const std::vector<double>& beta,
                       const std::vector<double>& running_mean,
                       const std::vector<double>& running_var, double eps,
                       Map4& out);

void bn2d_backward(const Map4& dout, const Map4& xhat,
                   const std::vector<double>& gamma,
                   const std::vector<double>& save_invstd, Map4& din,
                   std::vector<double>& dgamma, std::vector<double>& dbeta);

void relu_forward(const Map4& in, Map4& out);
void relu_backward(const Map4& in, const Map4& dout, Map4& din);

// Spatial mean per channel: (n,h,w,c) -> (n,c)
void gap_forward(const Map4& in, Mat& out);
void gap_backward(const Mat& dout, int h, int w, Map4& din);

// Pairwise distance rows; used by retrieval. metric_cosine=false -> Euclidean.
void pairwise_rows(const Mat& q, const Mat& g, bool metric_cosine, Mat& out);

} // namespace pgan::kernels
