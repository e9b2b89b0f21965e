#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pgan {

/// Pixel raster in [0,1], layout (y, x, channel). ch is 1 (graymap) or 3
/// (pixmap).
struct Image {
    int h = 0, w = 0, ch = 0;
    std::vector<double> v;

    Image() = default;
    Image(int h_, int w_, int ch_)
        : h(h_), w(w_), ch(ch_),
          v(static_cast<std::size_t>(h_) * w_ * ch_, 0.0) {}

    double& at(int y, int x, int c) {
        return v[(static_cast<std::size_t>(y) * w + x) * ch + c];
    }
    double at(int y, int x, int c) const {
        return v[(static_cast<std::size_t>(y) * w + x) * ch + c];
    }
};

/// Binary P5 (graymap) or P6 (pixmap), 8-bit. Values are quantized with
/// round(v * 255) on write and divided by 255 on read, so write/read
/// round-trips are byte-stable.
void write_pnm(const std::string& path, const Image& img);
Image read_pnm(const std::string& path);

/// Writes an 8-bit P5 graymap from raw bytes (heatmap export).
void write_pgm_bytes(const std::string& path, int h, int w,
                     const std::vector<std::uint8_t>& bytes);

} // namespace pgan
