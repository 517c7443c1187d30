#include "ahgcn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include "ahgcn/atomic_file.hpp"

namespace ahgcn::image_io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

Rgb8 read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) fail(path, "cannot open");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng initialisation failed");
    }
    Rgb8 out;
    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "malformed PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "only 8-bit PNG is supported (bit depth " + std::to_string(depth) + ")");
    }
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != out.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unexpected PNG row layout");
    }
    out.pixels.resize(out.height * stride);
    rows.resize(out.height);
    for (std::size_t r = 0; r < out.height; ++r) rows[r] = out.pixels.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

// Skips whitespace and '#' comments between PPM header tokens.
std::size_t read_ppm_token(std::istream& in, const std::filesystem::path& path) {
    int ch = in.peek();
    while (ch != EOF && (std::isspace(ch) || ch == '#')) {
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            in.get();
        }
        ch = in.peek();
    }
    std::size_t value = 0;
    if (!(in >> value)) fail(path, "malformed PPM header");
    return value;
}

Rgb8 read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char magic[2] = {};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '6') fail(path, "only binary PPM (P6) is supported");
    Rgb8 out;
    out.width = read_ppm_token(in, path);
    out.height = read_ppm_token(in, path);
    const std::size_t maxval = read_ppm_token(in, path);
    if (maxval != 255) fail(path, "only 8-bit PPM (maxval 255) is supported");
    in.get();
    out.pixels.resize(out.width * out.height * 3);
    in.read(reinterpret_cast<char*>(out.pixels.data()),
            static_cast<std::streamsize>(out.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(out.pixels.size())) {
        fail(path, "truncated PPM pixel data");
    }
    return out;
}

}  // namespace

Rgb8 read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) fail(path, "cannot open");
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), 8);
    if (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (probe.gcount() >= 2 && sig[0] == 'P') return read_ppm(path);
    fail(path, "unrecognised image format (expected PNG or PPM)");
}

void write_png(const std::filesystem::path& path, const Rgb8& image) {
    if (image.pixels.size() != image.width * image.height * 3) {
        throw std::invalid_argument("write_png: pixel buffer does not match dimensions");
    }
    write_atomically(path, [&](const std::filesystem::path& tmp) {
        FilePtr file(std::fopen(tmp.c_str(), "wb"));
        if (!file) fail(tmp, "cannot create");
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            fail(tmp, "libpng initialisation failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            fail(tmp, "PNG encoding failed");
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                     static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (std::size_t r = 0; r < image.height; ++r) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * image.width * 3));
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    });
}

EquirectImage to_equirect(const Rgb8& image) {
    EquirectImage img;
    img.width = image.width;
    img.height = image.height;
    img.pixels.resize(image.pixels.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i) img.pixels[i] = image.pixels[i] / 255.0;
    return img;
}

Rgb8 from_viewport(const ViewportImage& vp) {
    Rgb8 out;
    out.width = out.height = vp.resolution;
    out.pixels.resize(vp.pixels.size());
    for (std::size_t i = 0; i < vp.pixels.size(); ++i) {
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(vp.pixels[i], 0.0, 1.0) * 255.0));
    }
    return out;
}

}  // namespace ahgcn::image_io
