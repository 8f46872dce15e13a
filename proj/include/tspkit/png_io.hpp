#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace tspkit::png {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw decoded PNG: samples are unpacked to one value per channel, row-major.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 8;  // 8 or 16 (sub-byte depths are expanded to 8)
  bool palette = false;
  std::vector<std::uint16_t> samples;
};

Raster read(const std::filesystem::path& path);

// Writers are deterministic: fixed compression settings and no time chunk.
void write_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels);
void write_gray16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                  const std::vector<std::uint16_t>& pixels);
void write_rgb8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                const std::vector<std::uint8_t>& pixels);
void write_rgba8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels);

}  // namespace tspkit::png
