#pragma once

// Little-endian byte containers shared by the partition and n-gram model files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "topicmark/error.hpp"

namespace topicmark::detail {

inline std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  /// Appends FNV-1a of everything written so far.
  void checksum() { u64(fnv1a(buf_.data(), buf_.size())); }

  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data, std::string what)
      : buf_(std::move(data)), what_(std::move(what)) {}

  static ByteReader from_stream(std::istream& in, std::string what) {
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), std::move(what));
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw ParseError("truncated " + what_ + ": needed " + std::to_string(n) +
                           " bytes, " + std::to_string(remaining()) + " left",
                       pos_);
    }
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(what_ + ": " + msg, pos_); }

  template <typename T>
  T uint() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{buf_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect(std::string_view magic) {
    const std::size_t at = pos_;
    need(magic.size());
    if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw ParseError(what_ + ": bad magic", at);
    }
    pos_ += magic.size();
  }
  const std::uint8_t* cursor() const { return buf_.data() + pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  /// Verifies the trailing FNV-1a checksum over all bytes before it.
  void verify_checksum() {
    const std::size_t at = pos_;
    const std::uint64_t expected = fnv1a(buf_.data(), pos_);
    if (u64() != expected) throw ParseError(what_ + ": checksum mismatch", at);
    if (remaining() != 0) throw ParseError(what_ + ": trailing bytes", pos_);
  }

 private:
  std::vector<std::uint8_t> buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace topicmark::detail
