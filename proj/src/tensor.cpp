#include "pgan/tensor.hpp"

#include <algorithm>
#include <cstring>

namespace pgan {

FeatureMap slice_sample(const Map4& batch, int ni, int src_h, int src_w) {
    FeatureMap fm(batch.h, batch.w, batch.c, src_h, src_w);
    const std::size_t len = static_cast<std::size_t>(batch.h) * batch.w * batch.c;
    std::memcpy(fm.v.data(), batch.v.data() + batch.offset(ni, 0, 0),
                len * sizeof(double));
    return fm;
}

void store_sample(Map4& batch, int ni, const FeatureMap& fm) {
    require(batch.h == fm.h && batch.w == fm.w && batch.c == fm.c,
            "store_sample: geometry mismatch");
    const std::size_t len = static_cast<std::size_t>(batch.h) * batch.w * batch.c;
    std::memcpy(batch.v.data() + batch.offset(ni, 0, 0), fm.v.data(),
                len * sizeof(double));
}

void require(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

} // namespace pgan
