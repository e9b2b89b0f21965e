#include "pgan/image_io.hpp"

#include <cmath>
#include <fstream>

#include "pgan/errors.hpp"

namespace pgan {

void write_pnm(const std::string& path, const Image& img) {
    if (img.ch != 1 && img.ch != 3)
        throw IngestError("write_pnm: unsupported channel count for " + path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IngestError("write_pnm: cannot open " + path);
    f << (img.ch == 1 ? "P5" : "P6") << "\n"
      << img.w << " " << img.h << "\n255\n";
    std::vector<std::uint8_t> buf(img.v.size());
    for (std::size_t i = 0; i < img.v.size(); ++i) {
        double x = img.v[i];
        if (x < 0.0) x = 0.0;
        if (x > 1.0) x = 1.0;
        buf[i] = static_cast<std::uint8_t>(std::lround(x * 255.0));
    }
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

namespace {
int read_pnm_token(std::istream& f) {
    // skips whitespace and '#' comments
    int c = f.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = f.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = f.get();
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = f.get();
    }
    if (!any) throw IngestError("read_pnm: malformed header");
    return value;
}
} // namespace

Image read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("read_pnm: cannot open " + path);
    char p = 0, kind = 0;
    f.get(p);
    f.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw IngestError("read_pnm: unsupported format in " + path);
    const int ch = kind == '5' ? 1 : 3;
    const int w = read_pnm_token(f);
    const int h = read_pnm_token(f);
    const int maxval = read_pnm_token(f);
    if (maxval != 255) throw IngestError("read_pnm: only 8-bit rasters supported: " + path);

    Image img(h, w, ch);
    std::vector<std::uint8_t> buf(img.v.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
    if (f.gcount() != static_cast<std::streamsize>(buf.size()))
        throw IngestError("read_pnm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.v[i] = static_cast<double>(buf[i]) / 255.0;
    return img;
}

void write_pgm_bytes(const std::string& path, int h, int w,
                     const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IngestError("write_pgm_bytes: cannot open " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

} // namespace pgan
