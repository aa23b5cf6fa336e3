#pragma once

// Array container: a zip archive holding a `manifest` of key=value lines and
// named little-endian float32 blobs. Used for attention dumps, soft prompt
// checkpoints and probability-mask stacks.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "steerseg/errors.hpp"
#include "steerseg/zip.hpp"

namespace steerseg::container {

/// Ordered key=value document. Keys are unique; order is insertion order.
class Manifest {
 public:
  void set(const std::string& key, std::string value) {
    require(!key.empty() && key.find_first_of("=\n") == std::string::npos,
            "manifest: invalid key '" + key + "'");
    require(value.find('\n') == std::string::npos,
            "manifest: value for '" + key + "' contains a newline");
    for (auto& [k, v] : items_) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    items_.emplace_back(key, std::move(value));
  }
  void set(const std::string& key, long long v) { set(key, std::to_string(v)); }
  void set(const std::string& key, int v) { set(key, std::to_string(v)); }
  void set(const std::string& key, std::size_t v) { set(key, std::to_string(v)); }
  void set_double(const std::string& key, double v) { set(key, format_double(v)); }

  bool has(const std::string& key) const { return lookup(key) != nullptr; }

  const std::string& get(const std::string& key) const {
    const auto* v = lookup(key);
    if (!v) throw FormatError("manifest: missing key '" + key + "'");
    return *v;
  }

  long long get_int(const std::string& key) const {
    const auto& s = get(key);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw FormatError("manifest: key '" + key + "' is not an integer: " + s);
    }
  }

  double get_double(const std::string& key) const {
    const auto& s = get(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw FormatError("manifest: key '" + key + "' is not a number: " + s);
    }
  }

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : items_) out += k + "=" + v + "\n";
    return out;
  }

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw FormatError("manifest: malformed line " + std::to_string(lineno));
      }
      auto key = line.substr(0, eq);
      if (m.has(key)) throw FormatError("manifest: duplicate key '" + key + "'");
      m.items_.emplace_back(std::move(key), line.substr(eq + 1));
    }
    return m;
  }

  /// Shortest text that parses back to the same double.
  static std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof buf, "%.*g", prec, v);
      if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
  }

 private:
  const std::string* lookup(const std::string& key) const {
    for (const auto& [k, v] : items_) {
      if (k == key) return &v;
    }
    return nullptr;
  }
  std::vector<std::pair<std::string, std::string>> items_;
};

/// Encodes doubles as little-endian float32.
inline std::string encode_f32(const std::vector<double>& values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = char((bits >> (8 * b)) & 0xff);
  }
  return out;
}

inline std::vector<double> decode_f32(const std::string& blob,
                                      const std::string& what) {
  if (blob.size() % 4 != 0) {
    throw FormatError(what + ": blob size " + std::to_string(blob.size()) +
                      " is not a multiple of 4");
  }
  std::vector<double> out(blob.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= std::uint32_t(static_cast<unsigned char>(blob[i * 4 + b])) << (8 * b);
    }
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) throw FormatError(what + ": non-finite value");
    out[i] = f;
  }
  return out;
}

/// Named float32 arrays plus a manifest, persisted as a stored zip.
class ArrayContainer {
 public:
  Manifest manifest;

  void put(const std::string& name, const std::vector<double>& values) {
    require(name != "manifest", "container: reserved blob name");
    for (auto& [n, b] : blobs_) {
      if (n == name) {
        b = encode_f32(values);
        return;
      }
    }
    blobs_.emplace_back(name, encode_f32(values));
  }

  bool has(const std::string& name) const {
    for (const auto& [n, b] : blobs_) {
      if (n == name) return true;
    }
    return false;
  }

  std::vector<double> get(const std::string& name) const {
    return decode_f32(raw(name), name);
  }

  const std::string& raw(const std::string& name) const {
    for (const auto& [n, b] : blobs_) {
      if (n == name) return b;
    }
    throw FormatError("container: missing blob '" + name + "'");
  }

  std::string serialize() const {
    std::vector<zip::Entry> entries;
    entries.push_back({"manifest", manifest.serialize()});
    for (const auto& [n, b] : blobs_) entries.push_back({n, b});
    return zip::write_archive(entries);
  }

  static ArrayContainer parse(const std::string& bytes) {
    ArrayContainer c;
    auto entries = zip::read_archive(bytes);
    const auto* m = zip::find(entries, "manifest");
    if (!m) throw FormatError("container: no manifest entry");
    c.manifest = Manifest::parse(m->data);
    for (auto& e : entries) {
      if (e.name != "manifest") c.blobs_.emplace_back(e.name, std::move(e.data));
    }
    return c;
  }

  void save(const std::filesystem::path& path) const {
    zip::write_file(path, serialize());
  }
  static ArrayContainer load(const std::filesystem::path& path) {
    return parse(zip::read_file(path));
  }

 private:
  std::vector<std::pair<std::string, std::string>> blobs_;
};

}  // namespace steerseg::container
