#include "attnmask/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace attnmask {
namespace {

void write_image(const std::filesystem::path& path, png_image& img, const void* buffer, const void* colormap) {
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer, 0, colormap)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw RuntimeError("cannot write PNG " + path.string() + ": " + msg);
  }
}

png_image begin_read(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw RuntimeError("cannot open " + path.string());
  if (std::filesystem::file_size(path, ec) == 0) throw ValidationError("empty PNG file " + path.string());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ValidationError("cannot parse PNG " + path.string() + ": " + msg);
  }
  return img;
}

void finish_read(const std::filesystem::path& path, png_image& img, void* buffer) {
  if (!png_image_finish_read(&img, nullptr, buffer, 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ValidationError("cannot decode PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  static_assert(sizeof(Rgb) == 3);
  write_image(path, img, image.values().data(), nullptr);
}

void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_GRAY;
  write_image(path, img, image.values().data(), nullptr);
}

std::array<Rgb, 256> voc_palette() {
  std::array<Rgb, 256> palette{};
  for (int i = 0; i < 256; ++i) {
    int c = i;
    int r = 0, g = 0, b = 0;
    for (int j = 0; j < 8; ++j) {
      r |= ((c >> 0) & 1) << (7 - j);
      g |= ((c >> 1) & 1) << (7 - j);
      b |= ((c >> 2) & 1) << (7 - j);
      c >>= 3;
    }
    palette[i] = Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  return palette;
}

void write_png_voc_palette(const std::filesystem::path& path, const SegMask& mask) {
  const auto palette = voc_palette();
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(mask.width());
  img.height = static_cast<png_uint_32>(mask.height());
  img.format = PNG_FORMAT_RGB_COLORMAP;
  img.colormap_entries = 256;
  write_image(path, img, mask.values().data(), palette.data());
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  png_image img = begin_read(path);
  img.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(img.height), static_cast<int>(img.width));
  finish_read(path, img, out.values().data());
  return out;
}

Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
  png_image img = begin_read(path);
  if ((img.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) != 0 ||
      (img.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
    png_image_free(&img);
    throw ValidationError("mask PNG must be 8-bit single-channel: " + path.string());
  }
  img.format = PNG_FORMAT_GRAY;
  Grid<std::uint8_t> out(static_cast<int>(img.height), static_cast<int>(img.width));
  finish_read(path, img, out.values().data());
  return out;
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace attnmask
