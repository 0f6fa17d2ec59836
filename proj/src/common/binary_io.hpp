#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dasco/error.hpp"

namespace dasco::io {

inline void write_f32_le(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      char bytes[4];
      for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
      out.write(bytes, 4);
    }
  }
}

inline void write_u8(std::ostream& out, std::span<const std::uint8_t> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
}

/// Reads exactly values.size() floats or throws FormatError naming `field`.
inline void read_f32_le(std::istream& in, std::span<float> values, const std::string& field) {
  const auto bytes = static_cast<std::streamsize>(values.size_bytes());
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()), bytes);
    if (in.gcount() != bytes) throw FormatError("truncated payload in field '" + field + "'");
  } else {
    std::vector<char> raw(values.size_bytes());
    in.read(raw.data(), bytes);
    if (in.gcount() != bytes) throw FormatError("truncated payload in field '" + field + "'");
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      values[i] = std::bit_cast<float>(bits);
    }
  }
}

inline void read_u8(std::istream& in, std::span<std::uint8_t> values, const std::string& field) {
  const auto bytes = static_cast<std::streamsize>(values.size());
  in.read(reinterpret_cast<char*>(values.data()), bytes);
  if (in.gcount() != bytes) throw FormatError("truncated payload in field '" + field + "'");
}

inline void expect_magic(std::istream& in, const char* magic, std::size_t length) {
  std::string got(length, '\0');
  in.read(got.data(), static_cast<std::streamsize>(length));
  if (in.gcount() != static_cast<std::streamsize>(length) || std::memcmp(got.data(), magic, length) != 0) {
    throw FormatError(std::string("bad magic, expected '") + std::string(magic, length) + "'");
  }
}

inline std::string read_header_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing header line");
  return line;
}

}  // namespace dasco::io
