#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "simq/common.hpp"

namespace simq {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written as little-endian host words");

/// Append-only little-endian encoder for the binary file formats.
class ByteWriter {
 public:
  void raw(std::string_view bytes) { out_.append(bytes); }

  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }

  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }

  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

/// Cursor over an in-memory file image. Every short read raises
/// FormatError("unexpected end of <what>").
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }

  std::string string() {
    auto n = u32();
    return std::string(raw(n));
  }

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  /// Rejects trailing bytes after a complete payload.
  void expect_end() const {
    if (!at_end()) throw FormatError("trailing bytes after " + what_);
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("unexpected end of " + what_);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

/// Checks an 11-byte "SIMQ-XXX vN" magic. Same family with another version
/// gives "unsupported version"; anything else "bad magic".
void check_magic(ByteReader& in, std::string_view expected);

}  // namespace simq
