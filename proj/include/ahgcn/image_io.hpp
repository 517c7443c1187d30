#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ahgcn/sphere.hpp"

namespace ahgcn::image_io {

// 8-bit RGB raster as stored on disk.
struct Rgb8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // (row, col, channel)
};

// Reads 8-bit PNG (gray, gray+alpha, RGB, RGBA; alpha dropped) or binary PPM (P6, maxval 255).
Rgb8 read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Rgb8& image);

// value / 255
EquirectImage to_equirect(const Rgb8& image);
Rgb8 from_viewport(const ViewportImage& vp);

}  // namespace ahgcn::image_io
