#pragma once

#include <filesystem>
#include <iosfwd>

#include "ssc/nn/network.hpp"

namespace ssc::nn {

/// Binary checkpoint layout (all integers and floats little-endian):
///
///   "SSCN" | u32 version | u32 layer_count
///   per layer:  u8 kind | i32 in | i32 out | i32 kernel | u8 padding | f64 rate
///   u32 blob_count
///   per blob:   u32 layer_index | u32 n_weights | f32[n_weights]
///               | u32 n_bias | f32[n_bias]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Network& net);
Network read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace ssc::nn
