#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc::io {

/// 8-bit RGB images are quantised as round(v * 255).
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_rgb_png(const std::filesystem::path& path);

/// Palette PNG storing one index per pixel.
void write_palette_png(const std::filesystem::path& path,
                       const Grid<std::uint8_t>& indices,
                       std::span<const std::array<std::uint8_t, 3>> palette);
Grid<std::uint8_t> read_index_png(const std::filesystem::path& path);

void write_gray16_png(const std::filesystem::path& path,
                      const Grid<std::uint16_t>& values);
Grid<std::uint16_t> read_gray16_png(const std::filesystem::path& path);

}  // namespace ssc::io
