#pragma once

// Little-endian encoding helpers for the binary formats (canonical snapshot
// payloads and serialized models). Multi-byte values are always written LE
// regardless of host order.

#include "mmgr/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace mmgr::bytes {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.append(s); }
  // u32 length prefix followed by the bytes
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  std::string take() { return std::move(out_); }
  const std::string& view() const { return out_; }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string out_;
};

/// Bounds-checked reader. Truncated or overlong input raises a corruption
/// error, since every decoded buffer came out of the content store.
class Reader {
 public:
  explicit Reader(std::string_view in, std::string_view what = "payload")
      : in_(in), what_(what) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) { return take(n); }
  std::string str() { return std::string(take(u32())); }

  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) {
      fail(ErrorCode::corruption, std::string(what_) + ": trailing bytes after end of record");
    }
  }

 private:
  std::string_view take(std::size_t n) {
    if (n > remaining()) fail(ErrorCode::corruption, std::string(what_) + ": truncated");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t get_le(int width) {
    auto s = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[static_cast<std::size_t>(i)])) << (8 * i);
    }
    return v;
  }

  std::string_view in_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace mmgr::bytes
