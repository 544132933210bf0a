// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dav::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
  }

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void i32(std::int32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open '" + path + "' for reading");
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw std::runtime_error("'" + path_ + "' is truncated");
  }
  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    bytes(got.data(), got.size());
    if (got != m) throw std::runtime_error("'" + path_ + "' is not a " + std::string(m) + " file");
  }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::int32_t i32() { return scalar<std::int32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  float f32() { return scalar<float>(); }
  std::string str(std::size_t max_len = 1 << 16) {
    const auto n = u32();
    if (n > max_len) throw std::runtime_error("'" + path_ + "' has an oversized string field");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::string& path() const { return path_; }

 private:
  template <typename U>
  U scalar() {
    U v;
    bytes(&v, sizeof v);
    return v;
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace dav::io
