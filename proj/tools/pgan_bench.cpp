// Serial vs OpenMP timing for the hot kernels, plus a bit-equality check
// between the two paths on every shape.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include <omp.h>

#include "pgan/kernels.hpp"
#include "pgan/rng.hpp"

using namespace pgan;

namespace {

double time_call(const std::function<void()>& fn, int iters) {
    fn(); // warmup
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / iters;
}

void fill(std::vector<double>& v, Rng& rng) {
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
}

struct Row {
    const char* name;
    double serial_ms, parallel_ms;
    bool identical;
};

void print_row(const Row& r) {
    std::printf("%-24s %10.3f ms %10.3f ms   x%.2f   %s\n", r.name, r.serial_ms,
                r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    const bool smoke = argc > 1 && std::string(argv[1]) == "--smoke";
    const int iters = smoke ? 2 : 20;
    const int n = smoke ? 4 : 32;

    Rng rng(7);
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-24s %13s %13s\n", "kernel", "serial", "parallel");

    bool all_ok = true;

    { // conv forward + both backward kernels on the training hot shape
        kernels::ConvShape cs{3, 1, 1, 64, 64};
        Map4 in(n, 8, 8, 64), dout(n, 8, 8, 64);
        std::vector<double> w(cs.weight_count()), b(64, 0.1);
        fill(in.v, rng);
        fill(dout.v, rng);
        fill(w, rng);

        Map4 out_s, out_p;
        kernels::set_parallel(false);
        const double ts = time_call([&] { kernels::conv2d_forward(in, cs, w, b, out_s); }, iters);
        kernels::set_parallel(true);
        const double tp = time_call([&] { kernels::conv2d_forward(in, cs, w, b, out_p); }, iters);
        Row r{"conv2d_forward", ts * 1e3, tp * 1e3, out_s.v == out_p.v};
        print_row(r);
        all_ok &= r.identical;

        Map4 din_s(n, 8, 8, 64), din_p(n, 8, 8, 64);
        kernels::set_parallel(false);
        const double ts2 = time_call([&] { kernels::conv2d_backward_data(dout, cs, w, din_s); }, iters);
        kernels::set_parallel(true);
        const double tp2 = time_call([&] { kernels::conv2d_backward_data(dout, cs, w, din_p); }, iters);
        Row r2{"conv2d_backward_data", ts2 * 1e3, tp2 * 1e3, din_s.v == din_p.v};
        print_row(r2);
        all_ok &= r2.identical;

        std::vector<double> dw_s(cs.weight_count(), 0.0), db_s(64, 0.0);
        std::vector<double> dw_p(cs.weight_count(), 0.0), db_p(64, 0.0);
        kernels::set_parallel(false);
        const double ts3 = time_call(
            [&] {
                std::fill(dw_s.begin(), dw_s.end(), 0.0);
                std::fill(db_s.begin(), db_s.end(), 0.0);
                kernels::conv2d_backward_params(in, dout, cs, dw_s, db_s);
            },
            iters);
        kernels::set_parallel(true);
        const double tp3 = time_call(
            [&] {
                std::fill(dw_p.begin(), dw_p.end(), 0.0);
                std::fill(db_p.begin(), db_p.end(), 0.0);
                kernels::conv2d_backward_params(in, dout, cs, dw_p, db_p);
            },
            iters);
        Row r3{"conv2d_backward_params", ts3 * 1e3, tp3 * 1e3,
               dw_s == dw_p && db_s == db_p};
        print_row(r3);
        all_ok &= r3.identical;
    }

    { // batch norm
        Map4 in(n, 8, 8, 128);
        fill(in.v, rng);
        std::vector<double> gamma(128, 1.0), beta(128, 0.0), mean, invstd;
        Map4 out_s, out_p, xhat;
        kernels::set_parallel(false);
        const double ts = time_call(
            [&] { kernels::bn2d_forward_train(in, gamma, beta, 1e-5, out_s, xhat, mean, invstd); },
            iters);
        kernels::set_parallel(true);
        const double tp = time_call(
            [&] { kernels::bn2d_forward_train(in, gamma, beta, 1e-5, out_p, xhat, mean, invstd); },
            iters);
        Row r{"bn2d_forward_train", ts * 1e3, tp * 1e3, out_s.v == out_p.v};
        print_row(r);
        all_ok &= r.identical;
    }

    { // retrieval distances
        const int nq = smoke ? 16 : 384;
        Mat q(nq, 64), g(nq, 64);
        fill(q.v, rng);
        fill(g.v, rng);
        Mat d_s, d_p;
        kernels::set_parallel(false);
        const double ts = time_call([&] { kernels::pairwise_rows(q, g, true, d_s); }, iters);
        kernels::set_parallel(true);
        const double tp = time_call([&] { kernels::pairwise_rows(q, g, true, d_p); }, iters);
        Row r{"pairwise_cosine", ts * 1e3, tp * 1e3, d_s.v == d_p.v};
        print_row(r);
        all_ok &= r.identical;
    }

    kernels::set_parallel(true);
    if (!all_ok) {
        std::fprintf(stderr, "serial/parallel outputs differ\n");
        return 1;
    }
    return 0;
}
