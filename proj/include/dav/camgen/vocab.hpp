// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dav {

using TokenId = std::size_t;
using Caption = std::vector<TokenId>;

enum class ShapeKind { kCircle, kSquare, kTriangle };

struct ColorKey {
  std::string_view name;
  std::array<float, 3> rgb;
};

/// Object colors. Saturated hues stay far from the grayscale backgrounds.
inline constexpr std::array<ColorKey, 6> kColors{{
    {"red", {0.90f, 0.15f, 0.15f}},
    {"green", {0.15f, 0.80f, 0.20f}},
    {"blue", {0.15f, 0.30f, 0.95f}},
    {"yellow", {0.95f, 0.90f, 0.15f}},
    {"magenta", {0.90f, 0.20f, 0.90f}},
    {"cyan", {0.15f, 0.90f, 0.90f}},
}};

inline constexpr std::array<std::string_view, 3> kShapeNames{"circle", "square", "triangle"};

/// Fixed token table: special tokens, filler, background, colors, shapes.
class Vocabulary {
 public:
  static constexpr TokenId kSos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kBackground = 2;
  static constexpr TokenId kAnd = 3;
  static constexpr TokenId kFirstColor = 4;
  static constexpr TokenId kFirstShape = kFirstColor + kColors.size();
  static constexpr std::size_t kSize = kFirstShape + kShapeNames.size();

  static std::string_view word(TokenId id) {
    static constexpr std::array<std::string_view, 4> specials{"<sos>", "<eos>", "background", "and"};
    if (id < kFirstColor) return specials[id];
    if (id < kFirstShape) return kColors[id - kFirstColor].name;
    if (id < kSize) return kShapeNames[id - kFirstShape];
    throw std::out_of_range("token id " + std::to_string(id) + " outside the vocabulary");
  }

  static std::optional<TokenId> find(std::string_view w) {
    for (TokenId id = 0; id < kSize; ++id) {
      if (word(id) == w) return id;
    }
    return std::nullopt;
  }

  static TokenId color_token(std::size_t color) { return kFirstColor + color; }
  static TokenId shape_token(ShapeKind s) { return kFirstShape + static_cast<std::size_t>(s); }
  static bool is_color(TokenId id) { return id >= kFirstColor && id < kFirstShape; }
  static std::size_t color_index(TokenId id) { return id - kFirstColor; }

  /// Words without the sos/eos markers; those are added here.
  static Caption encode(const std::vector<std::string>& words) {
    Caption c{kSos};
    for (const auto& w : words) {
      auto id = find(w);
      if (!id || *id == kSos || *id == kEos) throw std::invalid_argument("unknown caption word '" + w + "'");
      c.push_back(*id);
    }
    c.push_back(kEos);
    return c;
  }

  static std::vector<std::string> decode_words(const Caption& c) {
    std::vector<std::string> out;
    for (auto id : c) {
      if (id != kSos && id != kEos) out.emplace_back(word(id));
    }
    return out;
  }

  static std::string to_text(const Caption& c) {
    std::ostringstream os;
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? " " : "") << word(c[i]);
    return os.str();
  }

  static Caption null_caption() { return {kSos, kEos}; }
};

}  // namespace dav
