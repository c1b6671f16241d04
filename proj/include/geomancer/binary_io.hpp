#pragma once

#include "geomancer/common.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

namespace geomancer::binary {

// Little-endian primitives shared by every on-disk format.

inline void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 8);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw ArgumentError("unexpected end of binary file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw ArgumentError("unexpected end of binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

/// Bulk write of doubles; fast path on little-endian hosts.
inline void write_f64_array(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) write_f64(out, data[i]);
  }
}

inline void read_f64_array(std::istream& in, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    if (!in) throw ArgumentError("unexpected end of binary file");
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = read_f64(in);
  }
}

inline void write_magic(std::ostream& out, std::string_view magic) {
  char buf[8] = {};
  std::memcpy(buf, magic.data(), std::min<std::size_t>(magic.size(), 8));
  out.write(buf, 8);
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  char buf[8] = {};
  in.read(buf, 8);
  char want[8] = {};
  std::memcpy(want, magic.data(), std::min<std::size_t>(magic.size(), 8));
  if (!in || std::memcmp(buf, want, 8) != 0)
    throw ArgumentError("bad magic: not a " + std::string(magic) + " file");
}

}  // namespace geomancer::binary
