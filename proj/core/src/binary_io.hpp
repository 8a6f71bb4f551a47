// Little-endian binary file helpers shared by the on-disk formats.
#ifndef SPCKD_BINARY_IO_HPP
#define SPCKD_BINARY_IO_HPP

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "spckd/errors.hpp"

namespace spckd::detail {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline void write_f32_array(std::ostream& os, const float* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_f32(os, v[i]);
}

inline std::uint8_t read_u8(std::istream& is, const char* what) {
  const int c = is.get();
  if (c == EOF) throw FormatError(std::string("truncated file reading ") + what);
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  char b[4];
  if (!is.read(b, 4))
    throw FormatError(std::string("truncated file reading ") + what);
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[3])) << 24);
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
  const std::uint64_t lo = read_u32(is, what);
  const std::uint64_t hi = read_u32(is, what);
  return lo | (hi << 32);
}

inline float read_f32(std::istream& is, const char* what) {
  const std::uint32_t bits = read_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void read_f32_array(std::istream& is, float* v, std::size_t n,
                           const char* what) {
  for (std::size_t i = 0; i < n; ++i) v[i] = read_f32(is, what);
}

inline void expect_magic(std::istream& is, const char (&magic)[5],
                         const char* what) {
  char b[4];
  if (!is.read(b, 4))
    throw FormatError(std::string("truncated file reading magic of ") + what);
  if (std::memcmp(b, magic, 4) != 0)
    throw FormatError(std::string("bad magic for ") + what + ": expected '" +
                      magic + "'");
}

}  // namespace spckd::detail

#endif  // SPCKD_BINARY_IO_HPP
