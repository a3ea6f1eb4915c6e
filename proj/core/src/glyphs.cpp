#include "gridvid/glyphs.hpp"

#include <fstream>

#include "gridvid/errors.hpp"

namespace gridvid::data {

namespace {

// 8x8 bitmap digits, one byte per row, least-significant bit = leftmost
// column (public-domain basic font shapes).
constexpr uint8_t kDigitRows[10][8] = {
    {0x3E, 0x63, 0x73, 0x7B, 0x6F, 0x67, 0x3E, 0x00},  // 0
    {0x0C, 0x0E, 0x0C, 0x0C, 0x0C, 0x0C, 0x3F, 0x00},  // 1
    {0x1E, 0x33, 0x30, 0x1C, 0x06, 0x33, 0x3F, 0x00},  // 2
    {0x1E, 0x33, 0x30, 0x1C, 0x30, 0x33, 0x1E, 0x00},  // 3
    {0x38, 0x3C, 0x36, 0x33, 0x7F, 0x30, 0x78, 0x00},  // 4
    {0x3F, 0x03, 0x1F, 0x30, 0x30, 0x33, 0x1E, 0x00},  // 5
    {0x1C, 0x06, 0x03, 0x1F, 0x33, 0x33, 0x1E, 0x00},  // 6
    {0x3F, 0x33, 0x30, 0x18, 0x0C, 0x0C, 0x0C, 0x00},  // 7
    {0x1E, 0x33, 0x33, 0x1E, 0x33, 0x33, 0x1E, 0x00},  // 8
    {0x1E, 0x33, 0x33, 0x3E, 0x30, 0x18, 0x0E, 0x00},  // 9
};

}  // namespace

Glyph glyph_from_digit(int digit) {
  if (digit < 0 || digit > 9) throw ConfigError("glyph_from_digit: digit must be in [0,9]");
  Glyph g;
  g.height = g.width = kGlyphSize;
  g.pixels.resize(kGlyphSize * kGlyphSize);
  for (size_t y = 0; y < kGlyphSize; ++y)
    for (size_t x = 0; x < kGlyphSize; ++x)
      g.pixels[y * kGlyphSize + x] = (kDigitRows[digit][y] >> x) & 1 ? 1.0 : 0.0;
  return g;
}

Glyph load_glyph_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_glyph_pgm: cannot open " + path);

  auto next_token = [&in, &path]() {
    std::string tok;
    while (in) {
      in >> tok;
      if (!in) break;
      if (tok[0] == '#') {  // comment runs to end of line
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw IoError("load_glyph_pgm: truncated header in " + path);
  };

  if (next_token() != "P5") throw IoError("load_glyph_pgm: not a binary PGM: " + path);
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw IoError("load_glyph_pgm: unsupported PGM geometry in " + path);
  in.get();  // single whitespace byte after maxval

  std::vector<unsigned char> raw(size_t(w) * size_t(h));
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (!in) throw IoError("load_glyph_pgm: truncated pixel data in " + path);

  Glyph g;
  g.height = size_t(h);
  g.width = size_t(w);
  g.pixels.resize(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) g.pixels[i] = double(raw[i]) / double(maxval);
  return g;
}

}  // namespace gridvid::data
