#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridvid/tensor.hpp"

namespace gridvid::ad {

// Elementwise (same shape).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor scale(const Tensor& x, double c);

// x: [rows x cols], bias: [cols]; broadcast add over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// x: [H x W x C], bias: [C]; broadcast add over spatial positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// a: [m x k], b: [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a: [m x k], b: [n x k] -> [m x n] (a times b-transpose)
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Same data, new shape; numel must match.
Tensor reshape(const Tensor& x, Shape shape);

// a: [r1 x c], b: [r2 x c] -> [(r1+r2) x c]
Tensor concat_rows(const Tensor& a, const Tensor& b);

// Row-wise softmax over unmasked entries; masked entries are exactly zero.
// Every row must have at least one unmasked entry.
Tensor masked_softmax(const Tensor& logits, const std::vector<uint8_t>& mask);

// Per-row normalization over the last dimension, then gain/bias per column.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// table: [V x D], ids in [0, V) -> [ids.size() x D]. Backward scatter-adds.
Tensor embedding(const Tensor& table, std::vector<int> ids);

// logits: [M x K], targets in [0, K) -> scalar mean of -log softmax[target].
Tensor cross_entropy(const Tensor& logits, std::vector<int> targets);

// Mean over all elements of (a-b)^2.
Tensor mse(const Tensor& a, const Tensor& b);

// Sum of squared elements of (a-b); the squared L2 norm of the difference.
Tensor sum_sq_diff(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Identity forward, zero backward.
Tensor stop_gradient(const Tensor& x);

// Captures the values stop_gradient emits while a loss graph is built, and
// replays them, in call order, into later rebuilds of the same code path.
// Finite-difference probing needs this: the backward pass differentiates the
// loss with stop-gradient outputs held constant, so a probe that recomputed
// them from perturbed inputs would measure a different function. At most one
// recording or replaying scope may be active per thread.
class StopGradientTape {
 public:
  StopGradientTape() = default;

  class Recording {
   public:
    explicit Recording(StopGradientTape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;
  };

  class Replaying {
   public:
    explicit Replaying(const StopGradientTape& tape);
    ~Replaying();
    Replaying(const Replaying&) = delete;
    Replaying& operator=(const Replaying&) = delete;
  };

 private:
  friend Tensor stop_gradient(const Tensor& x);
  std::vector<std::vector<double>> values_;
  mutable size_t cursor_ = 0;
};

// x: [H x W x Cin], kernel: [kh x kw x Cin x Cout]; cross-correlation with
// zero padding. Output [OH x OW x Cout], OH = (H + 2*pad - kh)/stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int pad);

// Exact adjoint of conv2d in its input argument: x [h x w x Cout] with the
// same kernel layout -> [H x W x Cin], H = stride*(h-1) + kh - 2*pad.
Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, int stride, int pad);

}  // namespace gridvid::ad
