#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pgan/errors.hpp"

namespace pgan {

/// Batched feature maps, layout (n, y, x, c) row-major with c contiguous.
struct Map4 {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<double> v;

    Map4() = default;
    Map4(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_),
          v(static_cast<std::size_t>(n_) * h_ * w_ * c_, 0.0) {}

    std::size_t numel() const { return v.size(); }
    std::size_t offset(int ni, int y, int x) const {
        return ((static_cast<std::size_t>(ni) * h + y) * w + x) * c;
    }
    double& at(int ni, int y, int x, int ci) { return v[offset(ni, y, x) + ci]; }
    double at(int ni, int y, int x, int ci) const { return v[offset(ni, y, x) + ci]; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool same_shape(const Map4& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }
};

/// Row-major matrix; rows are batch entries (embeddings, logits, distances).
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c_) { return v[static_cast<std::size_t>(r) * cols + c_]; }
    double at(int r, int c_) const { return v[static_cast<std::size_t>(r) * cols + c_]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

/// A single H x W x C feature map with the geometry of the image it came
/// from, so masks rasterized in image pixels can be projected onto it.
struct FeatureMap {
    int h = 0, w = 0, c = 0;
    int src_h = 0, src_w = 0;
    std::vector<double> v;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int c_, int src_h_ = 0, int src_w_ = 0)
        : h(h_), w(w_), c(c_), src_h(src_h_), src_w(src_w_),
          v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int y, int x, int ci) {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ci];
    }
    double at(int y, int x, int ci) const {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ci];
    }
    bool same_geometry(const FeatureMap& o) const {
        return h == o.h && w == o.w && c == o.c;
    }
};

/// Copies sample `ni` of a batch into a standalone FeatureMap.
FeatureMap slice_sample(const Map4& batch, int ni, int src_h = 0, int src_w = 0);

/// Writes a FeatureMap into sample `ni` of a batch (shapes must agree).
void store_sample(Map4& batch, int ni, const FeatureMap& fm);

void require(bool cond, const std::string& what);

} // namespace pgan
