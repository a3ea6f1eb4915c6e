#include "gridvid/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "gridvid/errors.hpp"

namespace gridvid::attn {

using ad::Tensor;

const char* axis_name(Axis axis) {
  switch (axis) {
    case Axis::Temporal: return "temporal";
    case Axis::Row: return "row";
    case Axis::Column: return "column";
  }
  return "?";
}

size_t SparseAttentionPattern::pair_count() const {
  size_t total = 0;
  for (const auto& ks : keys) total += ks.size();
  return total;
}

SparseAttentionPattern build_pattern(Axis axis, GridShape grid) {
  if (grid.cells() == 0) throw DimensionError("build_pattern: empty grid");
  SparseAttentionPattern p;
  p.axis = axis;
  p.grid = grid;
  p.keys.resize(grid.cells());
  const size_t h = grid.rows, w = grid.cols;
  for (size_t l = 0; l < grid.frames; ++l) {
    for (size_t i = 0; i < h; ++i) {
      for (size_t j = 0; j < w; ++j) {
        const size_t q = (l * h + i) * w + j;
        auto& ks = p.keys[q];
        switch (axis) {
          case Axis::Temporal:
            for (size_t lp = 0; lp <= l; ++lp) ks.push_back(uint32_t((lp * h + i) * w + j));
            break;
          case Axis::Row:
            for (size_t ip = 0; ip <= i; ++ip) ks.push_back(uint32_t((l * h + ip) * w + j));
            break;
          case Axis::Column:
            for (size_t jp = 0; jp <= j; ++jp) ks.push_back(uint32_t((l * h + i) * w + jp));
            break;
        }
      }
    }
  }
  return p;
}

PatternSet build_patterns(GridShape grid) {
  return PatternSet{grid, build_pattern(Axis::Temporal, grid), build_pattern(Axis::Row, grid),
                    build_pattern(Axis::Column, grid)};
}

const SparseAttentionPattern& PatternSet::for_layer(size_t layer) const {
  switch (layer % 3) {
    case 0: return temporal;
    case 1: return row;
    default: return column;
  }
}

size_t exact_axis_pair_count(GridShape grid) {
  // Sum over all (l,i,j) of (l+1)+(i+1)+(j+1), in closed form.
  const size_t L = grid.frames, h = grid.rows, w = grid.cols;
  return L * h * w * (L + h + w + 3) / 2;
}

size_t formula_axis_pair_count(GridShape grid) {
  return grid.frames * grid.rows * grid.cols * (grid.frames + grid.rows + grid.cols);
}

size_t dense_pair_count(GridShape grid) {
  const size_t m = grid.cells();
  return m * m;
}

Tensor sparse_attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                             const SparseAttentionPattern& pattern, size_t n_text,
                             size_t heads) {
  if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape().size() != 2)
    throw DimensionError("sparse_attention_core: q/k/v must be rank-2");
  const size_t nv = q.shape()[0];
  const size_t d = q.shape()[1];
  if (k.shape() != v.shape() || k.shape()[1] != d)
    throw DimensionError("sparse_attention_core: k/v must be [(n_text+n_video) x D]");
  if (k.shape()[0] != n_text + nv)
    throw DimensionError("sparse_attention_core: key rows != n_text + n_video");
  if (heads == 0 || d % heads != 0)
    throw DimensionError("sparse_attention_core: D must be divisible by heads");
  if (nv == 0 || nv > pattern.grid.cells())
    throw DimensionError("sparse_attention_core: query rows must be a nonempty raster prefix");

  const size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));

  // Global key-row ids per query: text rows first, then offset pattern keys.
  auto rows = std::make_shared<std::vector<std::vector<uint32_t>>>(nv);
  for (size_t a = 0; a < nv; ++a) {
    auto& r = (*rows)[a];
    r.reserve(n_text + pattern.keys[a].size());
    for (size_t t = 0; t < n_text; ++t) r.push_back(uint32_t(t));
    for (uint32_t key : pattern.keys[a]) {
      if (key >= nv)
        throw ContractError("sparse_attention_core: pattern key beyond query prefix");
      r.push_back(uint32_t(n_text) + key);
    }
    if (r.empty()) throw ContractError("sparse_attention_core: empty attendable set");
  }

  // Softmax weights, saved for backward: probs[a][head*nk + z].
  auto probs = std::make_shared<std::vector<std::vector<double>>>(nv);
  std::vector<double> out(nv * d, 0.0);
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  std::vector<double> logits;
  for (size_t a = 0; a < nv; ++a) {
    const auto& r = (*rows)[a];
    const size_t nk = r.size();
    (*probs)[a].resize(heads * nk);
    for (size_t hd = 0; hd < heads; ++hd) {
      const size_t o = hd * dh;
      logits.assign(nk, 0.0);
      double max_z = -std::numeric_limits<double>::infinity();
      for (size_t z = 0; z < nk; ++z) {
        const double* qa = qv.data() + a * d + o;
        const double* kr = kv.data() + size_t(r[z]) * d + o;
        double dot = 0.0;
        for (size_t c = 0; c < dh; ++c) dot += qa[c] * kr[c];
        logits[z] = dot * inv_sqrt;
        max_z = std::max(max_z, logits[z]);
      }
      double denom = 0.0;
      for (size_t z = 0; z < nk; ++z) {
        logits[z] = std::exp(logits[z] - max_z);
        denom += logits[z];
      }
      double* pa = (*probs)[a].data() + hd * nk;
      for (size_t z = 0; z < nk; ++z) {
        const double p = logits[z] / denom;
        pa[z] = p;
        const double* vr = vv.data() + size_t(r[z]) * d + o;
        double* oa = out.data() + a * d + o;
        for (size_t c = 0; c < dh; ++c) oa[c] += p * vr[c];
      }
    }
  }

  return ad::make_node(
      {nv, d}, std::move(out), {q, k, v},
      [q, k, v, rows, probs, n_text, heads, dh, d, inv_sqrt](ad::Node& n) {
        const bool gq = q.node()->requires_grad;
        const bool gk = k.node()->requires_grad;
        const bool gv = v.node()->requires_grad;
        if (!gq && !gk && !gv) return;
        if (gq) q.node()->ensure_grad();
        if (gk) k.node()->ensure_grad();
        if (gv) v.node()->ensure_grad();
        const auto& qv = q.node()->value;
        const auto& kv = k.node()->value;
        const auto& vv = v.node()->value;
        const size_t nv_rows = n.shape[0];
        std::vector<double> dlogit;
        for (size_t a = 0; a < nv_rows; ++a) {
          const auto& r = (*rows)[a];
          const size_t nk = r.size();
          for (size_t hd = 0; hd < heads; ++hd) {
            const size_t o = hd * dh;
            const double* pa = (*probs)[a].data() + hd * nk;
            const double* dout = n.grad.data() + a * d + o;
            // dV and the per-key upstream dp.
            dlogit.assign(nk, 0.0);
            double mix = 0.0;  // sum_z p_z * dp_z
            for (size_t z = 0; z < nk; ++z) {
              const size_t row = size_t(r[z]) * d + o;
              double dp = 0.0;
              for (size_t c = 0; c < dh; ++c) dp += dout[c] * vv[row + c];
              if (gv) {
                for (size_t c = 0; c < dh; ++c) v.node()->grad[row + c] += pa[z] * dout[c];
              }
              dlogit[z] = dp;
              mix += pa[z] * dp;
            }
            for (size_t z = 0; z < nk; ++z) dlogit[z] = pa[z] * (dlogit[z] - mix);
            if (gq) {
              double* dq = q.node()->grad.data() + a * d + o;
              for (size_t z = 0; z < nk; ++z) {
                const double* kr = kv.data() + size_t(r[z]) * d + o;
                const double g = dlogit[z] * inv_sqrt;
                for (size_t c = 0; c < dh; ++c) dq[c] += g * kr[c];
              }
            }
            if (gk) {
              const double* qa = qv.data() + a * d + o;
              for (size_t z = 0; z < nk; ++z) {
                double* dk = k.node()->grad.data() + size_t(r[z]) * d + o;
                const double g = dlogit[z] * inv_sqrt;
                for (size_t c = 0; c < dh; ++c) dk[c] += g * qa[c];
              }
            }
          }
        }
      });
}

}  // namespace gridvid::attn
