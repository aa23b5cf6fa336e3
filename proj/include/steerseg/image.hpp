#pragma once

// RGB frames, integer label maps and PNG encode/decode (libpng). Indexed
// palette PNGs keep their raw palette indices so that VOS-style mask folders
// read back as label maps.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "steerseg/errors.hpp"
#include "steerseg/numerics.hpp"
#include "steerseg/zip.hpp"

namespace steerseg {

/// Row-major RGB image with channels in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), rgb(h * w * 3, fill) {}

  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return rgb[(r * width + c) * 3 + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return rgb[(r * width + c) * 3 + ch];
  }
  bool empty() const { return rgb.empty(); }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Row-major integer label grid (0 = background).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, int fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  int& at(std::size_t r, std::size_t c) { return labels[r * width + c]; }
  int at(std::size_t r, std::size_t c) const { return labels[r * width + c]; }

  numerics::DenseGrid indicator(int label) const {
    numerics::DenseGrid g = numerics::DenseGrid::matrix(height, width);
    for (std::size_t i = 0; i < labels.size(); ++i) g[i] = labels[i] == label ? 1.0 : 0.0;
    return g;
  }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Palette used for exported masks: index 0 black, then the usual VOS colors.
inline const std::vector<std::array<std::uint8_t, 3>>& mask_palette() {
  static const std::vector<std::array<std::uint8_t, 3>> palette = [] {
    std::vector<std::array<std::uint8_t, 3>> p(256);
    for (int i = 0; i < 256; ++i) {
      int r = 0, g = 0, b = 0, c = i;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      p[i] = {std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)};
    }
    return p;
  }();
  return palette;
}

namespace png_detail {

struct Decoded {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;  // 8-bit samples, row-major
  std::vector<std::array<std::uint8_t, 3>> palette;
};

struct ReadState {
  const std::string* bytes;
  std::size_t pos;
  char error[256];
};

inline void on_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<ReadState*>(png_get_error_ptr(png));
  if (st) std::snprintf(st->error, sizeof st->error, "%s", msg);
  png_longjmp(png, 1);
}
inline void on_warning(png_structp, png_const_charp) {}

inline void read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->bytes->size()) png_error(png, "unexpected end of data");
  std::memcpy(out, st->bytes->data() + st->pos, n);
  st->pos += n;
}

// Decodes to 8-bit samples. Palette images keep their indices (1 channel);
// 16-bit samples are stripped; sub-byte samples are unpacked.
inline bool decode(Decoded* out, ReadState* st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, st, read_cb);
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (bit_depth < 8) png_set_packing(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  const int passes = png_set_interlace_handling(png);
  png_read_update_info(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_colorp pal = nullptr;
    int n = 0;
    if (png_get_PLTE(png, info, &pal, &n) == PNG_INFO_PLTE) {
      out->palette.resize(256);
      for (int i = 0; i < n; ++i) out->palette[i] = {pal[i].red, pal[i].green, pal[i].blue};
    }
  }
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->color_type = color_type;
  out->channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->pixels.resize(rowbytes * out->height);
  // Row-by-row reading keeps C++ temporaries out of the setjmp region.
  for (int pass = 0; pass < passes; ++pass) {
    for (std::uint32_t r = 0; r < out->height; ++r) {
      png_read_row(png, out->pixels.data() + r * rowbytes, nullptr);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline Decoded decode_or_throw(const std::string& bytes, const std::string& what) {
  Decoded d;
  ReadState st{&bytes, 0, {0}};
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw LoadError(what + ": not a PNG file");
  }
  if (!decode(&d, &st)) {
    throw LoadError(what + ": corrupt PNG (" + std::string(st.error) + ")");
  }
  return d;
}

struct WriteState {
  std::string* out;
  char error[256];
};

inline void write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<WriteState*>(png_get_io_ptr(png));
  st->out->append(reinterpret_cast<const char*>(data), n);
}
inline void flush_cb(png_structp) {}

inline void on_write_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<WriteState*>(png_get_error_ptr(png));
  if (st) std::snprintf(st->error, sizeof st->error, "%s", msg);
  png_longjmp(png, 1);
}

// Encodes 8-bit rows. `palette` non-null selects an indexed image.
inline bool encode(std::uint32_t w, std::uint32_t h, int color_type,
                   const std::uint8_t* pixels, std::size_t rowbytes,
                   const png_color* palette, int palette_size, WriteState* st) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st, on_write_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, st, write_cb, flush_cb);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) png_set_PLTE(png, info, palette, palette_size);
  png_write_info(png, info);
  for (std::uint32_t r = 0; r < h; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels + r * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace png_detail

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::string encode_png_rgb(const Image& img) {
  require(!img.empty(), "encode_png_rgb: empty image");
  std::vector<std::uint8_t> px(img.rgb.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(img.rgb[i]);
  std::string out;
  png_detail::WriteState st{&out, {0}};
  if (!png_detail::encode(std::uint32_t(img.width), std::uint32_t(img.height),
                          PNG_COLOR_TYPE_RGB, px.data(), img.width * 3, nullptr, 0, &st)) {
    throw LoadError(std::string("PNG encode failed: ") + st.error);
  }
  return out;
}

/// Encodes labels 0..255 as an indexed-palette PNG.
inline std::string encode_png_indexed(const LabelMap& labels) {
  require(!labels.labels.empty(), "encode_png_indexed: empty label map");
  std::vector<std::uint8_t> px(labels.labels.size());
  int max_label = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const int v = labels.labels[i];
    require(v >= 0 && v <= 255, "encode_png_indexed: label outside 0..255");
    px[i] = std::uint8_t(v);
    max_label = std::max(max_label, v);
  }
  const int n = std::max(2, max_label + 1);
  std::vector<png_color> pal(n);
  for (int i = 0; i < n; ++i) {
    const auto& c = mask_palette()[i];
    pal[i] = {c[0], c[1], c[2]};
  }
  std::string out;
  png_detail::WriteState st{&out, {0}};
  if (!png_detail::encode(std::uint32_t(labels.width), std::uint32_t(labels.height),
                          PNG_COLOR_TYPE_PALETTE, px.data(), labels.width, pal.data(), n, &st)) {
    throw LoadError(std::string("PNG encode failed: ") + st.error);
  }
  return out;
}

/// Decodes any PNG to RGB in [0, 1]. Palette entries are expanded; alpha is
/// dropped.
inline Image decode_png_rgb(const std::string& bytes, const std::string& what = "image") {
  auto d = png_detail::decode_or_throw(bytes, what);
  Image img(d.height, d.width);
  const auto& pal = d.palette.empty() ? mask_palette() : d.palette;
  for (std::size_t r = 0; r < d.height; ++r) {
    for (std::size_t c = 0; c < d.width; ++c) {
      const std::uint8_t* p = &d.pixels[(r * d.width + c) * d.channels];
      std::array<std::uint8_t, 3> rgb{};
      if (d.color_type == PNG_COLOR_TYPE_PALETTE) {
        rgb = pal[p[0]];
      } else if (d.channels >= 3) {
        rgb = {p[0], p[1], p[2]};
      } else {
        rgb = {p[0], p[0], p[0]};
      }
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[ch] / 255.0;
    }
  }
  return img;
}

/// Decodes an indexed (or 8-bit grayscale) PNG to its raw sample values.
inline LabelMap decode_png_labels(const std::string& bytes, const std::string& what = "mask") {
  auto d = png_detail::decode_or_throw(bytes, what);
  if (d.channels != 1) {
    throw LoadError(what + ": expected an indexed or grayscale PNG");
  }
  LabelMap m(d.height, d.width);
  for (std::size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = d.pixels[i];
  return m;
}

inline Image read_png_rgb(const std::filesystem::path& p) {
  return decode_png_rgb(zip::read_file(p), p.string());
}
inline LabelMap read_png_labels(const std::filesystem::path& p) {
  return decode_png_labels(zip::read_file(p), p.string());
}
inline void write_png_rgb(const std::filesystem::path& p, const Image& img) {
  zip::write_file(p, encode_png_rgb(img));
}
inline void write_png_indexed(const std::filesystem::path& p, const LabelMap& m) {
  zip::write_file(p, encode_png_indexed(m));
}

}  // namespace steerseg
