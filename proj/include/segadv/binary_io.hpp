#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "segadv/error.hpp"

// Little-endian primitives shared by the checkpoint, perturbation and patch
// database formats.
namespace segadv::binary {

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 4);
}

inline void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  out.write(bytes, 8);
}

inline void read_exact(std::istream& in, char* dst, std::streamsize n, std::string_view what) {
  in.read(dst, n);
  if (in.gcount() != n) throw DataError("truncated " + std::string(what));
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  read_exact(in, got.data(), static_cast<std::streamsize>(got.size()), what);
  if (got != magic) {
    throw DataError(std::string(what) + ": bad magic, expected \"" + std::string(magic) + "\"");
  }
}

inline std::uint32_t read_u32(std::istream& in, std::string_view what) {
  unsigned char bytes[4];
  read_exact(in, reinterpret_cast<char*>(bytes), 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in, std::string_view what) {
  unsigned char bytes[8];
  read_exact(in, reinterpret_cast<char*>(bytes), 8, what);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void expect_end(std::istream& in, std::string_view what) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(std::string(what) + ": trailing bytes after payload");
  }
}

}  // namespace segadv::binary
