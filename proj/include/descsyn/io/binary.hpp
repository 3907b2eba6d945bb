#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

// Little-endian scalar encoding used by the dataset container and the
// checkpoint format, independent of host byte order.

namespace descsyn {

struct TruncatedData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

inline void append_f32_le(std::string& out, float v) {
  append_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

inline void append_f64_le(std::string& out, double v) {
  append_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::uint32_t read_u32_le() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t read_u64_le() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    }
    pos_ += 8;
    return v;
  }

  float read_f32_le() { return std::bit_cast<float>(read_u32_le()); }
  double read_f64_le() { return std::bit_cast<double>(read_u64_le()); }

  std::string_view read_bytes(std::size_t n) {
    require(n);
    const std::string_view v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }

 private:
  void require(std::size_t n) const {
    if (remaining() < n) throw TruncatedData("unexpected end of data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace descsyn
