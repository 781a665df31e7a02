#include "cranberry/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "cranberry/errors.hpp"

namespace cranberry {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw DataError("cannot open '" + path.string() + "'");
    return f;
}

// quiet handlers: the DataError raised after the longjmp names the file
extern "C" void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
extern "C" void png_quiet_warning(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw DataError("libpng init failed");
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw DataError("libpng init failed");
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

}  // namespace

Image read_png_rgb(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    if (setjmp(png_jmpbuf(r.png))) throw DataError("failed to decode PNG '" + path.string() + "'");
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    png_uint_32 w = png_get_image_width(r.png, r.info);
    png_uint_32 h = png_get_image_height(r.png, r.info);
    int bit_depth = png_get_bit_depth(r.png, r.info);
    int color_type = png_get_color_type(r.png, r.info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(r.png);
    }
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    std::vector<png_byte> rowbuf(static_cast<std::size_t>(w) * 3);
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, rowbuf.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
            img.data[o] = rowbuf[x * 3] / 255.0f;
            img.data[o + 1] = rowbuf[x * 3 + 1] / 255.0f;
            img.data[o + 2] = rowbuf[x * 3 + 2] / 255.0f;
        }
    }
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
    if (image.width <= 0 || image.height <= 0) throw DataError("empty image");
    FilePtr f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw DataError("failed to encode PNG '" + path.string() + "'");
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    std::vector<png_byte> rowbuf(static_cast<std::size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = image.at(x, y, c);
                if (!std::isfinite(v)) throw DataError("non-finite pixel");
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                rowbuf[x * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0f));
            }
        }
        png_write_row(w.png, rowbuf.data());
    }
    png_write_end(w.png, nullptr);
}

std::pair<int, int> read_png_dimensions(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    if (setjmp(png_jmpbuf(r.png))) throw DataError("failed to read PNG header '" + path.string() + "'");
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    return {static_cast<int>(png_get_image_width(r.png, r.info)),
            static_cast<int>(png_get_image_height(r.png, r.info))};
}

std::vector<uint16_t> read_png_gray16(const std::filesystem::path& path, int& width, int& height) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    if (setjmp(png_jmpbuf(r.png))) throw DataError("failed to decode PNG '" + path.string() + "'");
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    png_uint_32 w = png_get_image_width(r.png, r.info);
    png_uint_32 h = png_get_image_height(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16) {
        throw DataError("'" + path.string() + "' is not a 16-bit grayscale PNG");
    }
    width = static_cast<int>(w);
    height = static_cast<int>(h);

    std::vector<uint16_t> out(static_cast<std::size_t>(w) * h);
    std::vector<png_byte> rowbuf(static_cast<std::size_t>(w) * 2);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, rowbuf.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            out[static_cast<std::size_t>(y) * w + x] =
                static_cast<uint16_t>((rowbuf[x * 2] << 8) | rowbuf[x * 2 + 1]);
        }
    }
    png_read_end(r.png, nullptr);
    return out;
}

void write_png_gray16(const std::filesystem::path& path, const std::vector<uint16_t>& pixels,
                      int width, int height) {
    if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height) {
        throw DataError("gray16 buffer does not match dimensions");
    }
    FilePtr f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw DataError("failed to encode PNG '" + path.string() + "'");
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, width, height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    std::vector<png_byte> rowbuf(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const uint16_t v = pixels[static_cast<std::size_t>(y) * width + x];
            rowbuf[x * 2] = static_cast<png_byte>(v >> 8);
            rowbuf[x * 2 + 1] = static_cast<png_byte>(v & 0xff);
        }
        png_write_row(w.png, rowbuf.data());
    }
    png_write_end(w.png, nullptr);
}

}  // namespace cranberry
