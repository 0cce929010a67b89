#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "common/errors.hpp"

namespace ctae::binio {

// Shared framing for the binary artifacts (data containers, ground truth,
// checkpoints): little-endian fields, an 8-byte magic, and a trailing crc32
// (zlib polynomial) over everything before the checksum. Readers reject bad
// magic, unknown versions, truncation, and checksum mismatches.

struct Writer {
  std::vector<unsigned char> buf;

  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  template <class T>
  void put(T v) {
    raw(&v, sizeof(T));
  }
  void put_f64s(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  void put_string(const std::string& s) {
    put<int64_t>(static_cast<int64_t>(s.size()));
    raw(s.data(), s.size());
  }

  void finish(const std::string& path) {
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    put(crc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) fail(ErrorKind::io, "write failed: " + path);
  }
};

struct Reader {
  std::vector<unsigned char> buf;
  size_t pos = 0;
  std::string path;

  Reader(const std::string& p, const char magic[8]) : path(p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open: " + p);
    buf.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf.size() < 16) fail(ErrorKind::io, "truncated file: " + p);
    const uint32_t stored = static_cast<uint32_t>(buf[buf.size() - 4]) |
                            static_cast<uint32_t>(buf[buf.size() - 3]) << 8 |
                            static_cast<uint32_t>(buf[buf.size() - 2]) << 16 |
                            static_cast<uint32_t>(buf[buf.size() - 1]) << 24;
    const uint32_t computed = static_cast<uint32_t>(
        crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (stored != computed) fail(ErrorKind::io, "checksum mismatch: " + p);
    buf.resize(buf.size() - 4);
    if (std::memcmp(buf.data(), magic, 8) != 0)
      fail(ErrorKind::io, "bad magic (not a recognized container): " + p);
    pos = 8;
  }

  void raw(void* p, size_t n) {
    if (pos + n > buf.size()) fail(ErrorKind::io, "truncated file: " + path);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  void get_f64s(std::vector<double>& v, size_t n) {
    v.resize(n);
    raw(v.data(), n * sizeof(double));
  }
  std::string get_string(size_t max_len = size_t(1) << 30) {
    const int64_t n = get<int64_t>();
    if (n < 0 || static_cast<size_t>(n) > max_len)
      fail(ErrorKind::io, "implausible string length in " + path);
    std::string s(static_cast<size_t>(n), '\0');
    raw(s.data(), s.size());
    return s;
  }
  void expect_end() const {
    if (pos != buf.size()) fail(ErrorKind::io, "trailing bytes: " + path);
  }
  void check_version(uint32_t v, uint32_t supported) const {
    if (v != supported)
      fail(ErrorKind::io, "unsupported format version " + std::to_string(v) + " in " + path +
                              " (this build reads version " + std::to_string(supported) + ")");
  }
};

inline int64_t checked_dim(int64_t v, const char* what, const std::string& path) {
  if (v < 0 || v > (int64_t(1) << 40))
    fail(ErrorKind::io, std::string("implausible ") + what + " in " + path);
  return v;
}

}  // namespace ctae::binio
