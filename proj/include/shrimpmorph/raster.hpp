#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shrimpmorph {

/// Co-registered RGB image and depth map. Depth is in millimetres; 0 means
/// "no reading".
struct RgbdRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major RGB triples, 3 * width * height
  std::vector<float> depth;       // row-major, width * height

  RgbdRaster() = default;
  RgbdRaster(int w, int h);

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t offset(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }

  /// Throws FormatError when plane sizes disagree or depth is negative/non-finite.
  void check() const;

  friend bool operator==(const RgbdRaster&, const RgbdRaster&) = default;
};

/// Serialized layout (little-endian):
///   0   char[4]  magic "RGBD"
///   4   u32      format version (1)
///   8   u32      width
///   12  u32      height
///   16  char[8]  channel descriptor "f32u8x3\0"
///   24  f32[w*h] depth plane, row-major
///   ..  u8[3*w*h] RGB triples, row-major
std::vector<std::uint8_t> encode_raster(const RgbdRaster& raster);
RgbdRaster decode_raster(const std::vector<std::uint8_t>& bytes);

void write_raster(const RgbdRaster& raster, const std::filesystem::path& path);
RgbdRaster read_raster(const std::filesystem::path& path);

/// Binary PPM (P6) of the RGB planes.
std::string encode_ppm(const RgbdRaster& raster);

// Small helpers shared by the binary model formats.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace shrimpmorph
