#pragma once

// Shared vocabulary of the synthetic world: named colors, shape kinds and the
// 64-word toy vocabulary with its tokenizer.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steerseg/errors.hpp"

namespace steerseg::world {

struct NamedColor {
  std::string_view name;
  std::array<double, 3> rgb;
};

/// Colors used to paint synthetic instances.
inline constexpr std::array<NamedColor, 6> kPaintColors{{
    {"red", {0.9, 0.15, 0.15}},
    {"green", {0.15, 0.8, 0.2}},
    {"blue", {0.2, 0.3, 0.95}},
    {"yellow", {0.95, 0.9, 0.2}},
    {"magenta", {0.9, 0.2, 0.85}},
    {"cyan", {0.2, 0.85, 0.9}},
}};

/// Paint colors plus two words the toy model knows but scenes never use.
inline constexpr std::array<NamedColor, 8> kColorWords{{
    {"red", {0.9, 0.15, 0.15}},
    {"green", {0.15, 0.8, 0.2}},
    {"blue", {0.2, 0.3, 0.95}},
    {"yellow", {0.95, 0.9, 0.2}},
    {"magenta", {0.9, 0.2, 0.85}},
    {"cyan", {0.2, 0.85, 0.9}},
    {"white", {1.0, 1.0, 1.0}},
    {"orange", {1.0, 0.55, 0.1}},
}};

inline constexpr std::array<double, 3> kBackground{0.1, 0.1, 0.1};

enum class Shape { circle, square, triangle };
inline constexpr std::array<std::string_view, 3> kShapeNames{"circle", "square", "triangle"};

inline std::string_view shape_name(Shape s) { return kShapeNames[std::size_t(s)]; }

inline std::optional<Shape> parse_shape(std::string_view w) {
  for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
    if (kShapeNames[i] == w) return Shape(i);
  }
  return std::nullopt;
}

inline std::optional<std::array<double, 3>> color_rgb(std::string_view name) {
  for (const auto& c : kColorWords) {
    if (c.name == name) return c.rgb;
  }
  return std::nullopt;
}

inline bool is_color_word(std::string_view w) { return color_rgb(w).has_value(); }

inline constexpr std::array<std::string_view, 4> kDirectionWords{"left", "right", "top", "bottom"};

inline bool is_direction_word(std::string_view w) {
  for (auto d : kDirectionWords) {
    if (d == w) return true;
  }
  return false;
}

inline constexpr std::array<std::string_view, 64> kVocabulary{
    // control
    "<pad>", "<unk>", "<bos>", "<eos>", "<soft>", "<img>",
    // colors
    "red", "green", "blue", "yellow", "magenta", "cyan", "white", "orange",
    // shapes
    "circle", "square", "triangle",
    // position and motion
    "left", "right", "top", "bottom", "center", "moving", "static",
    // nouns
    "object", "objects", "target", "frames", "consistently", "across",
    // function words
    "the", "expression", "distinguishing", "attributes", "of", "what", "is", "main",
    "or", "referred", "to", "in", "given", "question", "use", "above", "disambiguate",
    "from", "other", "similar", "respond", "with", "a", "single", "word", "that",
    "best", "describes", "on", "focus", "attention", "precisely", "region", "track"};

inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kSoftId = 4;
inline constexpr int kImgId = 5;

inline int word_id(std::string_view w) {
  for (std::size_t i = 0; i < kVocabulary.size(); ++i) {
    if (kVocabulary[i] == w) return int(i);
  }
  return kUnkId;
}

/// Lowercases and splits on every non-alphanumeric character.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(char(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace steerseg::world
