#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "cegzsl/error.hpp"
#include "cegzsl/matrix.hpp"

namespace cegzsl::binary {

// Little-endian byte sink used by the dataset and checkpoint formats.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  template <class U>
  void le(U v) {
    static_assert(std::is_integral_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<std::uint8_t>((static_cast<std::make_unsigned_t<U>>(v) >> (8 * i)) & 0xff));
    }
  }
  void u8(std::uint8_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void floats(std::span<const float> v) {
    for (float f : v) f32(f);
  }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  // rows u32, cols u32, then the row-major payload.
  void matrix(const Mat& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    floats(m.values());
  }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError("unexpected end of file");
  }
  std::string magic(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  template <class U>
  U le() {
    need(sizeof(U));
    std::make_unsigned_t<U> v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::make_unsigned_t<U>>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::uint8_t u8() { return le<std::uint8_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }

  Mat floats(std::size_t rows, std::size_t cols) {
    need(rows * cols * 4);
    std::vector<float> v(rows * cols);
    for (auto& f : v) f = f32();
    return Mat(rows, cols, std::move(v));
  }
  std::string string() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Mat matrix() {
    const auto r = u32();
    const auto c = u32();
    return floats(r, c);
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s) {
  return fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::vector<std::uint8_t> read_file(const std::string& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::string& path, std::string_view text);

}  // namespace cegzsl::binary
