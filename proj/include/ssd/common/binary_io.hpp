#pragma once

// Little-endian primitives for the checkpoint, soft-label and image-blob
// container formats.

#include <bit>
#include <cstdint>
#include <type_traits>
#include <utility>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "ssd/common/error.hpp"

namespace ssd::io {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw FormatError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t max_len = 1u << 26) {
  const auto len = read_le<std::uint32_t>(in);
  if (len > max_len) throw FormatError("string length out of range");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw FormatError("truncated string");
  return s;
}

inline void write_floats(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) write_le(out, v);
  }
}

inline void read_floats(std::istream& in, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size_bytes())))
      throw FormatError("truncated float array");
  } else {
    for (float& v : values) v = read_le<float>(in);
  }
}

}  // namespace ssd::io
