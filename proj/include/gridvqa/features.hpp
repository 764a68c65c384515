#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridvqa/tensor.hpp"

namespace gridvqa {

// Binary layout (see docs/formats.md):
//   "GFEA1"
//   repeated until EOF:
//     u32 id_length, id bytes, u32 G, u32 C, f32 values[G * G * C] (row-major G, G, C)
inline constexpr char kFeatureMagic[] = "GFEA1";

struct FeatureRecord {
    std::string image_id;
    Tensor<float> features;  // [G, G, C]
};

void write_feature_file(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);

/// Source of the visual grid features f_CNN(I), shape [G, G, C_vis].
///
/// File mode serves records loaded from a feature file (several grid sizes
/// per image are allowed). Synthetic mode derives values from
/// hash(image_id, G, seed), so any id and any grid size can be served.
class FeatureProvider {
public:
    enum class Kind { File, Synthetic };

    static FeatureProvider from_file(const std::filesystem::path& path);
    static FeatureProvider synthetic(std::size_t grid, std::size_t channels, std::uint64_t seed);

    Kind kind() const { return kind_; }
    std::size_t grid() const { return grid_; }
    std::size_t channels() const { return channels_; }
    // Changes the default grid size used by get(id).
    void set_grid(std::size_t grid);

    // Features at the provider's default grid size.
    Tensor<float> get(const std::string& image_id) const { return get(image_id, grid_); }
    Tensor<float> get(const std::string& image_id, std::size_t grid) const;

private:
    FeatureProvider() = default;

    Kind kind_ = Kind::Synthetic;
    std::size_t grid_ = 0;
    std::size_t channels_ = 0;
    std::uint64_t seed_ = 0;
    std::map<std::pair<std::string, std::size_t>, Tensor<float>> records_;
};

inline Tensor<float> get_features(const FeatureProvider& fp, const std::string& image_id) {
    return fp.get(image_id);
}

}  // namespace gridvqa
