#pragma once

// Little-endian primitives independent of host byte order.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "xaw/errors.hpp"

namespace xaw::detail {

inline void put_u32(std::ostream& os, std::uint32_t x) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(os, bits);
}

inline void put_f64(std::ostream& os, double f) {
  std::uint64_t bits;
  std::memcpy(&bits, &f, 8);
  put_u64(os, bits);
}

inline void read_exact(std::istream& is, char* buf, std::size_t n, const std::string& what) {
  is.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw ParseError("truncated " + what);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  read_exact(is, reinterpret_cast<char*>(b), 4, what);
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  read_exact(is, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

inline float get_f32(std::istream& is, const std::string& what) {
  const std::uint32_t bits = get_u32(is, what);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline double get_f64(std::istream& is, const std::string& what) {
  const std::uint64_t bits = get_u64(is, what);
  double f;
  std::memcpy(&f, &bits, 8);
  return f;
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char b[4];
  read_exact(is, b, 4, what);
  if (std::memcmp(b, magic, 4) != 0) throw ParseError(what + ": bad magic, expected " + std::string(magic, 4));
}

}  // namespace xaw::detail
