#pragma once

#include "sylva/common.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace sylva::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto old = buf_.size();
    buf_.resize(old + sizeof(T));
    std::memcpy(buf_.data() + old, &value, sizeof(T));
  }
  void put_bytes(const char* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }

  void flush_to(std::ostream& out) {
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<char> buf_;
};

/// Reads a whole stream into memory and decodes fixed-width fields; every
/// failure reports the byte offset where it happened.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) {
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  template <typename T>
  T get(const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void expect_magic(const char (&magic)[5]) {
    require(4, "magic");
    if (std::memcmp(buf_.data() + pos_, magic, 4) != 0)
      throw ParseError(std::string("bad magic, expected \"") + magic + "\"", pos_);
    pos_ += 4;
  }

  void require(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) throw ParseError(std::string("truncated input while reading ") + what, pos_);
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace sylva::detail
