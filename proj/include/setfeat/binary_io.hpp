#pragma once

// Little-endian byte encoding shared by the checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setfeat/errors.hpp"

namespace setfeat::io {

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void text(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { little(v, 2); }
  void u32(std::uint32_t v) { little(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& buffer() { return out_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void little(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  std::span<const std::uint8_t> bytes(std::size_t n, std::string_view what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string text(std::size_t n, std::string_view what) {
    auto s = bytes(n, what);
    return std::string(s.begin(), s.end());
  }
  std::uint8_t u8(std::string_view what) { return static_cast<std::uint8_t>(little(1, what)); }
  std::uint16_t u16(std::string_view what) { return static_cast<std::uint16_t>(little(2, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(little(4, what)); }
  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

 private:
  void need(std::size_t n, std::string_view what) {
    if (remaining() < n)
      throw FormatError("truncated input reading " + std::string(what) + ": expected " + std::to_string(n) +
                            " bytes, found " + std::to_string(remaining()),
                        pos_);
  }
  std::uint64_t little(int width, std::string_view what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace setfeat::io
