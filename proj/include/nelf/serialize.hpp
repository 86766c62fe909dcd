#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "nelf/common.hpp"

namespace nelf {

// Little-endian binary IO. The host is little-endian in practice; the
// byte-level writes below are explicit so the formats are pinned regardless.

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  write_bytes(os, buf, sizeof(T));
}

inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw IoError(std::string("truncated read: ") + what);
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T), what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void write_f32_array(std::ostream& os, const double* p, size_t n) {
  std::vector<float> tmp(n);
  for (size_t i = 0; i < n; ++i) tmp[i] = static_cast<float>(p[i]);
  write_bytes(os, tmp.data(), n * sizeof(float));
}

inline void read_f32_array(std::istream& is, double* p, size_t n, const char* what) {
  std::vector<float> tmp(n);
  read_bytes(is, tmp.data(), n * sizeof(float), what);
  for (size_t i = 0; i < n; ++i) p[i] = static_cast<double>(tmp[i]);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<uint16_t>(os, static_cast<uint16_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
  uint16_t n = read_le<uint16_t>(is, what);
  std::string s(n, '\0');
  if (n > 0) read_bytes(is, s.data(), n, what);
  return s;
}

}  // namespace nelf
