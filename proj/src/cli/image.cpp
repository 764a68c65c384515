#include "gridvqa/image.hpp"

#include <cmath>
#include <fstream>

#include "gridvqa/errors.hpp"

namespace gridvqa {

GrayImage render_attention(const Tensor<float>& p_att, std::size_t scale, std::optional<GridCell> outline) {
    if (p_att.rank() != 2 || scale == 0) throw DimensionError("render_attention needs a [G, G] map");
    const std::size_t rows = p_att.extent(0), cols = p_att.extent(1);
    GrayImage img{cols * scale, rows * scale, {}};
    img.pixels.resize(img.width * img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const double p = std::clamp(static_cast<double>(p_att.at(y / scale, x / scale)), 0.0, 1.0);
            img.pixels[y * img.width + x] = static_cast<std::uint8_t>(std::lround(255.0 * p));
        }
    }
    if (outline) {
        const std::size_t x0 = outline->col * scale, y0 = outline->row * scale;
        const std::size_t x1 = x0 + scale - 1, y1 = y0 + scale - 1;
        for (std::size_t k = 0; k < scale; ++k) {
            img.pixels[y0 * img.width + x0 + k] = 255;
            img.pixels[y1 * img.width + x0 + k] = 255;
            img.pixels[(y0 + k) * img.width + x0] = 255;
            img.pixels[(y0 + k) * img.width + x1] = 255;
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img, bool ascii) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open image for writing: " + path.string());
    os << (ascii ? "P2" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    if (ascii) {
        for (std::size_t y = 0; y < img.height; ++y) {
            for (std::size_t x = 0; x < img.width; ++x) os << (x ? " " : "") << static_cast<int>(img.at(x, y));
            os << '\n';
        }
    } else {
        os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    }
    if (!os) throw std::runtime_error("failed writing image: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open image: " + path.string());
    std::string magic;
    GrayImage img;
    int maxval = 0;
    is >> magic >> img.width >> img.height >> maxval;
    if (!is || (magic != "P5" && magic != "P2") || maxval != 255 || img.width == 0 || img.height == 0) {
        throw ParseError(path.string() + ": not an 8-bit PGM image");
    }
    img.pixels.resize(img.width * img.height);
    if (magic == "P5") {
        is.get();  // single whitespace after the header
        is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
        if (static_cast<std::size_t>(is.gcount()) != img.pixels.size()) throw ParseError(path.string() + ": truncated PGM");
    } else {
        for (auto& px : img.pixels) {
            int v;
            if (!(is >> v) || v < 0 || v > 255) throw ParseError(path.string() + ": bad PGM sample");
            px = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

}  // namespace gridvqa
