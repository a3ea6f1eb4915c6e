#pragma once

#include <cstdint>
#include <vector>

#include "gridvid/tensor.hpp"

namespace gridvid::attn {

// Video token grid geometry. Raster order is frame-major, then row, then
// column — the same order tokens are generated in.
struct GridShape {
  size_t frames = 0, rows = 0, cols = 0;
  size_t cells() const { return frames * rows * cols; }
  bool operator==(const GridShape&) const = default;
};

enum class Axis { Temporal, Row, Column };
const char* axis_name(Axis axis);

// Per-query attendable key sets for one axis. A query at (l,i,j) may attend
// along exactly one coordinate: earlier frames at the same (i,j), earlier rows
// at the same (l,j), or earlier columns at the same (l,i). The query's own
// cell is always in its set, so no set is empty.
struct SparseAttentionPattern {
  Axis axis = Axis::Temporal;
  GridShape grid;
  std::vector<std::vector<uint32_t>> keys;  // keys[q]: ascending raster ids, max is q

  size_t pair_count() const;
};

SparseAttentionPattern build_pattern(Axis axis, GridShape grid);

struct PatternSet {
  GridShape grid;
  SparseAttentionPattern temporal, row, column;

  // Layers cycle temporal, row, column.
  const SparseAttentionPattern& for_layer(size_t layer) const;
};

PatternSet build_patterns(GridShape grid);

// Total video-video attendable pairs summed over the three axes: each query
// (l,i,j) contributes (l+1) + (i+1) + (j+1) keys.
size_t exact_axis_pair_count(GridShape grid);

// The coarse per-axis budget L*h*w*(L+h+w), an upper envelope of the exact
// count used for complexity comparisons.
size_t formula_axis_pair_count(GridShape grid);

// Pair count of one full dense self-attention over all cells: (L*h*w)^2.
size_t dense_pair_count(GridShape grid);

// Multi-head scaled dot-product attention over gathered key sets, as a single
// fused graph node with a hand-written backward pass.
//
// q:      [n_video x D] query rows for a raster prefix (n_video <= cells)
// k, v:   [(n_text + n_video) x D]; rows [0, n_text) are text rows attendable
//         by every query, the remainder are video rows in raster order
// Per query, attention runs over {all text rows} ∪ {pattern keys <= query}.
ad::Tensor sparse_attention_core(const ad::Tensor& q, const ad::Tensor& k,
                                 const ad::Tensor& v, const SparseAttentionPattern& pattern,
                                 size_t n_text, size_t heads);

}  // namespace gridvid::attn
