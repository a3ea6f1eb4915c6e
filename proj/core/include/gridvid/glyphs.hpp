#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gridvid::data {

inline constexpr size_t kGlyphSize = 8;

// Grayscale stamp, row-major, values in [0,1].
struct Glyph {
  size_t height = 0, width = 0;
  std::vector<double> pixels;

  double at(size_t y, size_t x) const { return pixels[y * width + x]; }
};

// Built-in 8x8 bitmap digit (coverage 0/1); no external font files needed.
Glyph glyph_from_digit(int digit);

// Optional external glyph source: binary (P5) PGM, normalized to [0,1].
Glyph load_glyph_pgm(const std::string& path);

}  // namespace gridvid::data
