#include "gridvqa/checkpoint.hpp"

#include <fstream>

#include "gridvqa/binary_io.hpp"

namespace gridvqa {

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os.write(kCheckpointMagic, 5);
    for (const auto& r : records) {
        binio::put_string(os, r.name);
        binio::put_u32(os, static_cast<std::uint32_t>(r.value.rank()));
        for (auto e : r.value.shape()) binio::put_u32(os, static_cast<std::uint32_t>(e));
        for (float v : r.value.values()) binio::put_f32(os, v);
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open checkpoint: " + path.string());
    binio::expect_magic(is, kCheckpointMagic, 5, path.string());
    std::vector<CheckpointRecord> out;
    std::uint32_t name_len;
    while (binio::get_u32(is, name_len, "record name length", true)) {
        if (name_len > 4096) throw ParseError(path.string() + ": implausible record name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (static_cast<std::uint32_t>(is.gcount()) != name_len) throw ParseError(path.string() + ": truncated record name");
        std::uint32_t rank;
        binio::get_u32(is, rank, "rank");
        if (rank == 0 || rank > 8) throw ParseError(path.string() + ": record " + name + " has invalid rank");
        Shape shape(rank);
        for (auto& e : shape) {
            std::uint32_t v;
            binio::get_u32(is, v, "extent");
            if (v == 0) throw ParseError(path.string() + ": record " + name + " has a zero extent");
            e = v;
        }
        std::vector<float> values(shape_numel(shape));
        for (auto& v : values) v = binio::get_f32(is, "values");
        out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
    }
    return out;
}

}  // namespace gridvqa
