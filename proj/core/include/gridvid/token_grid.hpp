#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gridvid/errors.hpp"

namespace gridvid {

// Discrete latent code of a video: integer codebook indices on an
// L x h x w grid. Raster order is frame-major, then row, then column; that
// order is both the serialization order and the autoregressive generation
// order.
struct TokenGrid {
  size_t frames = 0, rows = 0, cols = 0;
  size_t vocab = 0;  // codebook size K, for validation
  std::vector<int> indices;

  TokenGrid() = default;
  TokenGrid(size_t l, size_t h, size_t w, size_t k)
      : frames(l), rows(h), cols(w), vocab(k), indices(l * h * w, 0) {}

  size_t size() const { return indices.size(); }

  int& at(size_t l, size_t i, size_t j) { return indices[(l * rows + i) * cols + j]; }
  int at(size_t l, size_t i, size_t j) const { return indices[(l * rows + i) * cols + j]; }

  static size_t raster_index(size_t l, size_t i, size_t j, size_t rows, size_t cols) {
    return (l * rows + i) * cols + j;
  }

  // Throws IndexError if any index leaves [0, vocab).
  void validate() const;
};

// Token grid file: magic "GDTK", u32 version (1), then L,h,w,K as u32, then
// raster-order u32 indices, little-endian.
void save_token_grid(const std::string& path, const TokenGrid& grid);
TokenGrid load_token_grid(const std::string& path);

}  // namespace gridvid
