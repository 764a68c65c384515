#include "gridvqa/features.hpp"

#include <fstream>

#include "gridvqa/binary_io.hpp"
#include "gridvqa/rng.hpp"

namespace gridvqa {

void write_feature_file(const std::filesystem::path& path, const std::vector<FeatureRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open feature file for writing: " + path.string());
    os.write(kFeatureMagic, 5);
    for (const auto& r : records) {
        const auto& f = r.features;
        if (f.rank() != 3 || f.extent(0) != f.extent(1)) {
            throw DimensionError("feature record " + r.image_id + " must be [G, G, C], got " + shape_str(f.shape()));
        }
        binio::put_string(os, r.image_id);
        binio::put_u32(os, static_cast<std::uint32_t>(f.extent(0)));
        binio::put_u32(os, static_cast<std::uint32_t>(f.extent(2)));
        for (float v : f.values()) binio::put_f32(os, v);
    }
    if (!os) throw std::runtime_error("failed writing feature file: " + path.string());
}

FeatureProvider FeatureProvider::from_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open feature file: " + path.string());
    binio::expect_magic(is, kFeatureMagic, 5, path.string());
    FeatureProvider fp;
    fp.kind_ = Kind::File;
    std::uint32_t id_len;
    while (binio::get_u32(is, id_len, "image id length", true)) {
        if (id_len > 4096) throw ParseError(path.string() + ": implausible image id length");
        std::string id(id_len, '\0');
        is.read(id.data(), id_len);
        if (static_cast<std::uint32_t>(is.gcount()) != id_len) throw ParseError(path.string() + ": truncated image id");
        std::uint32_t g, c;
        binio::get_u32(is, g, "grid size");
        binio::get_u32(is, c, "channel count");
        if (g == 0 || c == 0) throw ParseError(path.string() + ": record " + id + " has a zero extent");
        if (fp.channels_ == 0) {
            fp.channels_ = c;
            fp.grid_ = g;
        } else if (c != fp.channels_) {
            throw ParseError(path.string() + ": record " + id + " has " + std::to_string(c) +
                             " channels, expected " + std::to_string(fp.channels_));
        }
        std::vector<float> values(static_cast<std::size_t>(g) * g * c);
        for (auto& v : values) v = binio::get_f32(is, "feature values");
        fp.records_.insert_or_assign({id, g}, Tensor<float>({g, g, c}, std::move(values)));
    }
    if (fp.records_.empty()) throw ParseError(path.string() + ": no feature records");
    return fp;
}

FeatureProvider FeatureProvider::synthetic(std::size_t grid, std::size_t channels, std::uint64_t seed) {
    if (grid == 0 || channels == 0) throw ConfigError("synthetic features need positive grid and channels");
    FeatureProvider fp;
    fp.kind_ = Kind::Synthetic;
    fp.grid_ = grid;
    fp.channels_ = channels;
    fp.seed_ = seed;
    return fp;
}

Tensor<float> FeatureProvider::get(const std::string& image_id, std::size_t grid) const {
    if (kind_ == Kind::File) {
        auto it = records_.find({image_id, grid});
        if (it == records_.end()) {
            throw LookupError("no features for image \"" + image_id + "\" at grid size " + std::to_string(grid));
        }
        return it->second;
    }
    if (grid == 0) throw LookupError("grid size must be positive");
    Rng rng(splitmix64(fnv1a(image_id) ^ splitmix64(seed_ ^ (static_cast<std::uint64_t>(grid) << 32))));
    Tensor<float> out({grid, grid, channels_});
    for (auto& v : out.values()) v = static_cast<float>(rng.normal());
    return out;
}

void FeatureProvider::set_grid(std::size_t grid) {
    if (grid == 0) throw ConfigError("grid size must be positive");
    grid_ = grid;
}

}  // namespace gridvqa
