#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

// 8-bit PNG I/O. Output bytes depend only on pixel content.
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
// Indexed PNG using the 256-entry VOC color palette (class id -> color).
void write_png_voc_palette(const std::filesystem::path& path, const SegMask& mask);

RgbImage read_png_rgb(const std::filesystem::path& path);
// Requires a single-channel 8-bit PNG; class ids are never color-converted.
Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path);

std::array<Rgb, 256> voc_palette();

std::vector<char> read_file_bytes(const std::filesystem::path& path);

}  // namespace attnmask
