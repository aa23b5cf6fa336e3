#pragma once

// Minimal zip archive support: writes uncompressed ("stored") archives with
// fixed timestamps so output bytes depend only on entry names and contents;
// reads stored and deflated entries.

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steerseg/errors.hpp"

namespace steerseg::zip {

struct Entry {
  std::string name;
  std::string data;
};

namespace detail {

inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  Cursor(std::string_view buf, std::size_t pos) : buf_(buf), pos_(pos) {}
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = std::uint16_t(byte(0) | (byte(1) << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = byte(0) | (byte(1) << 8) | (byte(2) << 16) |
                      (std::uint32_t(byte(3)) << 24);
    pos_ += 4;
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto v = buf_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::uint32_t byte(std::size_t i) const {
    return static_cast<unsigned char>(buf_[pos_ + i]);
  }
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("zip: truncated archive");
  }
  std::string_view buf_;
  std::size_t pos_;
};

inline std::uint32_t crc32_of(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large blobs.
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off),
                  static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string inflate_raw(std::string_view in, std::size_t out_size) {
  std::string out(out_size, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw FormatError("zip: inflate init failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = ::inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != out_size) {
    throw FormatError("zip: corrupt deflate stream");
  }
  return out;
}

// 1980-01-01 00:00:00 in DOS format.
inline constexpr std::uint16_t kDosTime = 0;
inline constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

}  // namespace detail

/// Serializes entries, in the given order, to a stored zip archive.
inline std::string write_archive(const std::vector<Entry>& entries) {
  using namespace detail;
  std::string out;
  std::string central;
  for (const auto& e : entries) {
    require(!e.name.empty() && e.name.size() < 0xffff,
            "zip: invalid entry name");
    require(e.data.size() < 0xffffffffull, "zip: entry too large: " + e.name);
    const auto offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc32_of(e.data);
    const auto size = static_cast<std::uint32_t>(e.data.size());

    put32(out, 0x04034b50);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // stored
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out += e.name;
    out += e.data;

    put32(central, 0x02014b50);
    put16(central, 20);  // version made by
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, static_cast<std::uint16_t>(e.name.size()));
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central += e.name;
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

/// Parses an archive via its central directory. Supports stored and deflate
/// entries; verifies CRCs.
inline std::vector<Entry> read_archive(std::string_view buf) {
  using namespace detail;
  if (buf.size() < 22) throw FormatError("zip: file too short");
  std::optional<std::size_t> eocd;
  const std::size_t lo = buf.size() > 22 + 0xffff ? buf.size() - 22 - 0xffff : 0;
  for (std::size_t p = buf.size() - 22 + 1; p-- > lo;) {
    if (std::memcmp(buf.data() + p, "PK\x05\x06", 4) == 0) {
      eocd = p;
      break;
    }
  }
  if (!eocd) throw FormatError("zip: end of central directory not found");
  Cursor ec(buf, *eocd + 10);
  const std::uint16_t count = ec.u16();
  const std::uint32_t cd_size = ec.u32();
  const std::uint32_t cd_offset = ec.u32();
  if (std::size_t(cd_offset) + cd_size > *eocd) {
    throw FormatError("zip: central directory out of bounds");
  }

  std::vector<Entry> entries;
  entries.reserve(count);
  Cursor cd(buf, cd_offset);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (cd.u32() != 0x02014b50) throw FormatError("zip: bad central header");
    cd.skip(4);
    const std::uint16_t flags = cd.u16();
    const std::uint16_t method = cd.u16();
    cd.skip(4);
    const std::uint32_t crc = cd.u32();
    const std::uint32_t csize = cd.u32();
    const std::uint32_t usize = cd.u32();
    const std::uint16_t nlen = cd.u16();
    const std::uint16_t xlen = cd.u16();
    const std::uint16_t clen = cd.u16();
    cd.skip(8);
    const std::uint32_t local = cd.u32();
    std::string name(cd.bytes(nlen));
    cd.skip(std::size_t(xlen) + clen);
    if (flags & 1u) throw FormatError("zip: encrypted entry " + name);

    Cursor lh(buf, local);
    if (lh.u32() != 0x04034b50) throw FormatError("zip: bad local header for " + name);
    lh.skip(22);
    const std::uint16_t lnlen = lh.u16();
    const std::uint16_t lxlen = lh.u16();
    lh.skip(std::size_t(lnlen) + lxlen);
    std::string_view raw = lh.bytes(csize);

    std::string data;
    if (method == 0) {
      if (csize != usize) throw FormatError("zip: size mismatch for " + name);
      data.assign(raw);
    } else if (method == 8) {
      data = inflate_raw(raw, usize);
    } else {
      throw FormatError("zip: unsupported compression method " +
                        std::to_string(method) + " for " + name);
    }
    if (crc32_of(data) != crc) throw FormatError("zip: CRC mismatch for " + name);
    entries.push_back({std::move(name), std::move(data)});
  }
  return entries;
}

inline const Entry* find(const std::vector<Entry>& entries,
                         std::string_view name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("write failed for " + path.string());
}

}  // namespace steerseg::zip
