#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridvqa/tensor.hpp"

namespace gridvqa {

// Binary layout (see docs/formats.md):
//   "GPTR1"
//   repeated until EOF:
//     u32 name_length, name bytes, u32 rank, u32 extents[rank],
//     f32 values[product(extents)]
// All integers and floats little-endian.
inline constexpr char kCheckpointMagic[] = "GPTR1";

struct CheckpointRecord {
    std::string name;
    Tensor<float> value;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointRecord>& records);

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

}  // namespace gridvqa
