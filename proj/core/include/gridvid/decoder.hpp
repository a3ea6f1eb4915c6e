#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gridvid/attention.hpp"
#include "gridvid/checkpoint.hpp"
#include "gridvid/tensor.hpp"
#include "gridvid/text.hpp"
#include "gridvid/token_grid.hpp"

namespace gridvid::dec {

struct DecoderConfig {
  size_t frames = 4, rows = 4, cols = 4;  // video token grid: L, h, w
  size_t text_len = 16;                   // N, padded caption length
  size_t text_vocab = 22;                 // S
  size_t vocab = 64;                      // K, visual token vocabulary
  size_t codebook_dim = 16;               // d_B, width of the frozen codebook rows
  size_t dim = 64;                        // D
  size_t heads = 4;
  size_t layers = 3;                      // R, a multiple of 3 (one T/R/C triple per group)
  size_t ff_mult = 4;

  size_t cells() const { return frames * rows * cols; }  // M
  attn::GridShape grid() const { return {frames, rows, cols}; }
  void validate() const;
};

struct DecoderLayerParams {
  ad::Tensor ln1_gain, ln1_bias;  // pre-attention norm, shared by text and video rows
  ad::Tensor wq, wk, wv, wo;      // D x D projections
  ad::Tensor ln2_gain, ln2_bias;  // pre-feedforward norm
  ad::Tensor ff1_w, ff1_b;        // D x 4D, 4D
  ad::Tensor ff2_w, ff2_b;        // 4D x D, D
};

struct DecoderParams {
  DecoderConfig config;
  ad::Tensor text_embed;  // S x D
  ad::Tensor text_pos;    // N x D
  ad::Tensor video_pos;   // M x D
  ad::Tensor bov;         // 1 x D, the begin-of-video input row
  ad::Tensor w_in;        // d_B x D, lifts codebook rows to model width
  ad::Tensor codebook;    // K x d_B, frozen copy of the quantizer codebook
  std::vector<DecoderLayerParams> layer;
  ad::Tensor final_ln_gain, final_ln_bias;
  ad::Tensor w_out, b_out;  // D x K, K

  static DecoderParams init(const DecoderConfig& config, const ad::Tensor& codebook,
                            uint64_t seed);

  NamedTensors named() const;
  std::vector<ad::Tensor> trainable() const;  // everything except the frozen codebook

  void save(const std::string& path) const;
  static DecoderParams load(const std::string& path, const DecoderConfig& config);
};

// Caption embedding with positions, all N rows including pads. Pad rows are
// excluded from attention downstream, not here.
ad::Tensor embed_text(const TextSequence& text, const DecoderParams& params);

// Codebook-space rows lifted to model width plus grid positions, unshifted.
ad::Tensor embed_video_tokens(const ad::Tensor& b, const DecoderParams& params);

// Next-token logits for a raster prefix. Passing all M tokens gives the
// teacher-forcing pass; passing the first p < M tokens gives p+1 rows of
// logits where row p predicts token p. Inputs are shifted right one step with
// the begin-of-video row in front, so row m never sees token m.
ad::Tensor decoder_forward(const TextSequence& text, std::span<const int> tokens,
                           const DecoderParams& params, const attn::PatternSet& patterns);

// Mean negative log-likelihood of the grid's tokens under decoder_forward.
ad::Tensor decoder_loss(const TextSequence& text, const TokenGrid& tokens,
                        const DecoderParams& params, const attn::PatternSet& patterns);

struct GenTrainConfig {
  double lr = 5e-4;
  size_t steps = 2000;
  size_t batch = 1;  // caption/grid pairs per step
  uint64_t seed = 0;
  size_t log_every = 50;
};

struct GenTrainStats {
  size_t step = 0;
  double loss = 0.0;
};

// Adam training over caption/token-grid pairs with a frozen codebook.
// Throws TrainingError on non-finite loss.
DecoderParams train_decoder(const std::vector<std::pair<TextSequence, TokenGrid>>& pairs,
                            const DecoderConfig& config, const ad::Tensor& codebook,
                            const GenTrainConfig& train,
                            const std::function<void(const GenTrainStats&)>& log = nullptr);

}  // namespace gridvid::dec
