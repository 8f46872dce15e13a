#include "tspkit/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

namespace tspkit::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw PngError("cannot open " + path.string());
  return f;
}

void on_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  std::longjmp(png_jmpbuf(png), 1);
}

void on_warning(png_structp, png_const_charp) {}

void write_impl(const std::filesystem::path& path, std::size_t width, std::size_t height,
                int color_type, int bit_depth, int channels, const std::uint8_t* bytes) {
  if (width == 0 || height == 0) throw PngError("cannot write empty image " + path.string());
  FilePtr f = open(path, "wb");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  if (!png) throw PngError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  const std::size_t row_bytes = width * channels * (bit_depth / 8);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PngError("writing " + path.string() + ": " + message);
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // samples are host (little-endian) order
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw PngError("failed writing " + path.string());
}

}  // namespace

Raster read(const std::filesystem::path& path) {
  FilePtr f = open(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw PngError(path.string() + " is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  if (!png) throw PngError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  Raster r;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("reading " + path.string() + ": " + message);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  r.width = png_get_image_width(png, info);
  r.height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  r.palette = color_type == PNG_COLOR_TYPE_PALETTE;
  if (r.palette) {
    png_set_palette_to_rgb(png);
  } else if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  r.channels = png_get_channels(png, info);
  r.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * r.height);
  for (std::size_t y = 0; y < r.height; ++y) png_read_row(png, buffer.data() + y * row_bytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = r.width * r.height * static_cast<std::size_t>(r.channels);
  r.samples.resize(count);
  if (r.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      r.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) r.samples[i] = buffer[i];
  }
  return r;
}

void write_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height) throw PngError("gray8: pixel count mismatch");
  write_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 8, 1, pixels.data());
}

void write_gray16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                  const std::vector<std::uint16_t>& pixels) {
  if (pixels.size() != width * height) throw PngError("gray16: pixel count mismatch");
  std::vector<std::uint8_t> bytes(pixels.size() * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(pixels[i] & 0xff);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] >> 8);
  }
  write_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 16, 1, bytes.data());
}

void write_rgb8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height * 3) throw PngError("rgb8: pixel count mismatch");
  write_impl(path, width, height, PNG_COLOR_TYPE_RGB, 8, 3, pixels.data());
}

void write_rgba8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height * 4) throw PngError("rgba8: pixel count mismatch");
  write_impl(path, width, height, PNG_COLOR_TYPE_RGB_ALPHA, 8, 4, pixels.data());
}

}  // namespace tspkit::png
