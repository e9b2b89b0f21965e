#pragma once

// Central-difference gradient verification shared by the layer tests and the
// acceptance suite: perturb each coordinate, difference the loss, compare to
// the analytic gradient with a relative tolerance.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gradcheck {

struct Result {
    double max_err = 0.0;     // max over coords of |a-f| / max(|a|,|f|,floor)
    int checked = 0;
    int failures = 0;
    std::string worst;

    bool ok() const { return failures == 0; }
};

/// loss() must re-evaluate the forward pass from the current contents of x.
inline Result check(const std::function<double()>& loss, std::vector<double>& x,
                    const std::vector<double>& analytic, double h = 1e-5,
                    double rtol = 1e-4, double atol = 1e-7) {
    Result res;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double a = analytic[i];
        const double err = std::abs(a - fd);
        const double scale = std::max({std::abs(a), std::abs(fd), 1e-3});
        res.max_err = std::max(res.max_err, err / scale);
        ++res.checked;
        if (err > atol + rtol * scale) {
            ++res.failures;
            if (res.failures == 1)
                res.worst = "coord " + std::to_string(i) + ": analytic " +
                            std::to_string(a) + " vs fd " + std::to_string(fd);
        }
    }
    return res;
}

/// Deterministic pseudo-random weights for projecting vector outputs to the
/// scalar the checker needs.
inline std::vector<double> projection(std::size_t n, unsigned salt = 1) {
    std::vector<double> w(n);
    unsigned state = 2463534242u + salt * 2654435761u;
    for (auto& x : w) {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        x = static_cast<double>(state % 2000) / 1000.0 - 1.0;
    }
    return w;
}

} // namespace gradcheck
