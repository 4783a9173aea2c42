#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "depthkv/errors.hpp"

namespace depthkv::detail {

// Little-endian scalar IO, independent of host byte order.

inline void write_u32(std::ostream& out, std::uint32_t value) {
  unsigned char bytes[4] = {
      static_cast<unsigned char>(value & 0xFF),
      static_cast<unsigned char>((value >> 8) & 0xFF),
      static_cast<unsigned char>((value >> 16) & 0xFF),
      static_cast<unsigned char>((value >> 24) & 0xFF),
  };
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline void write_f32(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  write_u32(out, bits);
}

inline bool read_exact(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

inline std::uint32_t decode_u32(const unsigned char* bytes) {
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline std::uint32_t read_u32_or_throw(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!read_exact(in, bytes, 4)) {
    throw ParseError(ParseErrc::truncated,
                     std::string("truncated while reading ") + what);
  }
  return decode_u32(bytes);
}

inline float decode_f32(const unsigned char* bytes) {
  const std::uint32_t bits = decode_u32(bytes);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace depthkv::detail
