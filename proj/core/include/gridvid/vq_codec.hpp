#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gridvid/checkpoint.hpp"
#include "gridvid/ops.hpp"
#include "gridvid/tensor.hpp"
#include "gridvid/token_grid.hpp"
#include "gridvid/video.hpp"

namespace gridvid::vq {

// Frame-wise autoencoder geometry. Two stride-2 conv layers each way, so the
// latent grid is a quarter of the pixel grid per side.
struct VqConfig {
  size_t frames = 4;
  size_t height = 16, width = 16, channels = 1;
  size_t hidden = 32;         // encoder/decoder intermediate channels
  size_t embed_dim = 16;      // d_B, codebook row width
  size_t codebook_size = 64;  // K
  double beta = 0.25;         // commitment weight
  int kernel = 4, stride = 2, pad = 1;

  size_t latent_rows() const { return height / 4; }
  size_t latent_cols() const { return width / 4; }
  void validate() const;
};

struct VqParams {
  VqConfig config;
  ad::Tensor enc1_kernel, enc1_bias;  // [k,k,C,F], [F]
  ad::Tensor enc2_kernel, enc2_bias;  // [k,k,F,d_B], [d_B]
  ad::Tensor codebook;                // [K, d_B]
  ad::Tensor dec1_kernel, dec1_bias;  // [k,k,F,d_B], [F]
  ad::Tensor dec2_kernel, dec2_bias;  // [k,k,C,F], [C]

  static VqParams init(const VqConfig& config, uint64_t seed);

  NamedTensors named() const;
  std::vector<ad::Tensor> trainable() const;

  void save(const std::string& path) const;
  static VqParams load(const std::string& path, const VqConfig& config);
};

struct VqLossBreakdown {
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double beta = 0.0;
  double total = 0.0;  // reconstruction + codebook + beta * commitment
};

// Frame pixels -> latent, two stride-2 convs with a ReLU between.
ad::Tensor encode_frame(const ad::Tensor& frame, const VqParams& params);

// Latent rows -> nearest codebook indices; ties go to the lowest index.
std::vector<int> quantize(std::span<const double> latent_rows, size_t row_count,
                          const ad::Tensor& codebook);

// Codebook row gather; differentiable into the codebook.
ad::Tensor lookup(const std::vector<int>& indices, const ad::Tensor& codebook);

// Latent embedding -> frame pixels; ends in a sigmoid so outputs land in [0,1].
ad::Tensor decode_frame(const ad::Tensor& latent, const VqParams& params);

// Whole-video helpers working on values (no gradients kept by callers).
TokenGrid encode_video(const VideoTensor& video, const VqParams& params);
VideoTensor decode_tokens(const TokenGrid& tokens, const VqParams& params);

struct VqLoss {
  ad::Tensor total;  // scalar graph root
  VqLossBreakdown breakdown;
};

// The three-term objective averaged over frames, with the straight-through
// substitution feeding the decoder so reconstruction gradients reach the
// encoder.
VqLoss vqvae_loss(const VideoTensor& video, const VqParams& params);

struct VqTrainConfig {
  double lr = 1e-3;
  size_t steps = 2000;
  size_t batch_videos = 1;
  uint64_t seed = 0;
  size_t log_every = 100;
};

struct VqTrainStats {
  size_t step = 0;
  VqLossBreakdown loss;
  double pixel_mse = 0.0;  // mean squared reconstruction error per pixel
};

// Adam training loop. Throws TrainingError on non-finite loss.
VqParams train_vqvae(const std::vector<VideoTensor>& videos, const VqConfig& config,
                     const VqTrainConfig& train,
                     const std::function<void(const VqTrainStats&)>& log = nullptr);

// Per-pixel reconstruction MSE of the full encode/quantize/decode round trip.
double reconstruction_mse(const VideoTensor& video, const VqParams& params);

}  // namespace gridvid::vq
