#pragma once

// Little-endian primitive encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "eegspec/error.hpp"

namespace eegspec::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void WriteLe(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

inline void WriteBytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void WriteString16(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) Fail(ErrorCode::kInvalidArgument, "string too long: " + s.substr(0, 32));
  WriteLe<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  WriteBytes(out, s.data(), s.size());
}

inline void ReadBytes(std::istream& in, void* data, std::size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    Fail(ErrorCode::kFormat, std::string("truncated file while reading ") + what);
  }
}

template <typename T>
T ReadLe(std::istream& in, const char* what) {
  T value;
  ReadBytes(in, &value, sizeof(T), what);
  return value;
}

inline std::string ReadString16(std::istream& in, const char* what) {
  const auto n = ReadLe<std::uint16_t>(in, what);
  std::string s(n, '\0');
  if (n > 0) ReadBytes(in, s.data(), n, what);
  return s;
}

}  // namespace eegspec::detail
