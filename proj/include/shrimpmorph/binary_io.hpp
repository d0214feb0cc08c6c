#pragma once

// Little-endian byte buffers for the repo's binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f64s(const double* data, std::size_t n) {
    u32(static_cast<std::uint32_t>(n));
    bytes(data, n * sizeof(double));
  }

  std::vector<std::uint8_t>& buffer() { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  void bytes(void* out, std::size_t n) {
    if (n > buf_.size() - pos_) throw FormatError("truncated input");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    bytes(got.data(), got.size());
    if (got != tag) throw FormatError("bad magic, expected '" + std::string(tag) + "'");
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
  std::int64_t i64() { std::int64_t v; bytes(&v, sizeof v); return v; }
  float f32() { float v; bytes(&v, sizeof v); return v; }
  double f64() { double v; bytes(&v, sizeof v); return v; }
  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<double> f64s() {
    const auto n = u32();
    if (static_cast<std::size_t>(n) * sizeof(double) > buf_.size() - pos_) {
      throw FormatError("truncated input");
    }
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }

  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace shrimpmorph::detail
