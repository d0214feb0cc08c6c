#include "shrimpmorph/raster.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "shrimpmorph/binary_io.hpp"
#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

namespace {
constexpr std::string_view kMagic = "RGBD";
constexpr std::uint32_t kVersion = 1;
constexpr char kDescriptor[8] = {'f', '3', '2', 'u', '8', 'x', '3', '\0'};
}  // namespace

RgbdRaster::RgbdRaster(int w, int h)
    : width(w),
      height(h),
      rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0),
      depth(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f) {}

void RgbdRaster::check() const {
  if (width <= 0 || height <= 0) throw FormatError("raster dimensions must be positive");
  if (rgb.size() != pixel_count() * 3 || depth.size() != pixel_count()) {
    throw FormatError("raster planes do not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  for (float d : depth) {
    if (!std::isfinite(d) || d < 0.0f) throw FormatError("depth values must be finite and >= 0");
  }
}

std::vector<std::uint8_t> encode_raster(const RgbdRaster& raster) {
  raster.check();
  detail::ByteWriter w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(raster.width));
  w.u32(static_cast<std::uint32_t>(raster.height));
  w.bytes(kDescriptor, sizeof kDescriptor);
  w.bytes(raster.depth.data(), raster.depth.size() * sizeof(float));
  w.bytes(raster.rgb.data(), raster.rgb.size());
  return std::move(w.buffer());
}

RgbdRaster decode_raster(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kMagic);
  if (r.u32() != kVersion) throw FormatError("unsupported raster version");
  const auto width = r.u32();
  const auto height = r.u32();
  char descriptor[8];
  r.bytes(descriptor, sizeof descriptor);
  if (std::memcmp(descriptor, kDescriptor, sizeof kDescriptor) != 0) {
    throw FormatError("unsupported channel descriptor");
  }
  if (width == 0 || height == 0 || width > 1u << 15 || height > 1u << 15) {
    throw FormatError("implausible raster dimensions");
  }
  RgbdRaster raster(static_cast<int>(width), static_cast<int>(height));
  if (r.remaining() != raster.pixel_count() * (sizeof(float) + 3)) {
    throw FormatError("raster payload size mismatch (truncated or trailing bytes)");
  }
  r.bytes(raster.depth.data(), raster.depth.size() * sizeof(float));
  r.bytes(raster.rgb.data(), raster.rgb.size());
  return raster;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_raster(const RgbdRaster& raster, const std::filesystem::path& path) {
  write_file_bytes(path, encode_raster(raster));
}

RgbdRaster read_raster(const std::filesystem::path& path) {
  return decode_raster(read_file_bytes(path));
}

std::string encode_ppm(const RgbdRaster& raster) {
  std::string out = "P6\n" + std::to_string(raster.width) + " " +
                    std::to_string(raster.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(raster.rgb.data()), raster.rgb.size());
  return out;
}

}  // namespace shrimpmorph
