#include "gridvid/vq_codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridvid/adam.hpp"
#include "gridvid/errors.hpp"
#include "gridvid/rng.hpp"

namespace gridvid::vq {

using ad::Tensor;

void VqConfig::validate() const {
  if (frames == 0 || height == 0 || width == 0 || channels == 0)
    throw ConfigError("vq config: zero-sized video geometry");
  if (height % 4 != 0 || width % 4 != 0)
    throw ConfigError("vq config: frame sides must be divisible by 4 (two stride-2 convs)");
  if (hidden == 0 || embed_dim == 0 || codebook_size == 0)
    throw ConfigError("vq config: zero-sized model dimension");
  if (beta < 0.0) throw ConfigError("vq config: beta must be non-negative");
  if (kernel != 4 || stride != 2 || pad != 1)
    throw ConfigError("vq config: only kernel=4 stride=2 pad=1 is supported");
}

namespace {

Tensor init_conv(size_t kh, size_t kw, size_t cin, size_t cout, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / double(kh * kw * cin));
  std::vector<double> data(kh * kw * cin * cout);
  for (double& v : data) v = uniform_range(rng, -bound, bound);
  return Tensor::from_data({kh, kw, cin, cout}, data, true);
}

Tensor frame_leaf(const VideoTensor& video, size_t l) {
  const double* src = video.frame(l);
  std::vector<double> data(src, src + video.frame_size());
  return Tensor::from_data({video.height, video.width, video.channels}, data, false);
}

}  // namespace

VqParams VqParams::init(const VqConfig& config, uint64_t seed) {
  config.validate();
  auto rng = make_stream(seed, 0x76715f696e697400ull);
  VqParams p;
  p.config = config;
  const size_t k = size_t(config.kernel);
  p.enc1_kernel = init_conv(k, k, config.channels, config.hidden, rng);
  p.enc1_bias = Tensor::zeros({config.hidden}, true);
  p.enc2_kernel = init_conv(k, k, config.hidden, config.embed_dim, rng);
  p.enc2_bias = Tensor::zeros({config.embed_dim}, true);

  const double cb_bound = 1.0 / double(config.codebook_size);
  std::vector<double> cb(config.codebook_size * config.embed_dim);
  for (double& v : cb) v = uniform_range(rng, -cb_bound, cb_bound);
  p.codebook = Tensor::from_data({config.codebook_size, config.embed_dim}, cb, true);

  p.dec1_kernel = init_conv(k, k, config.hidden, config.embed_dim, rng);
  p.dec1_bias = Tensor::zeros({config.hidden}, true);
  p.dec2_kernel = init_conv(k, k, config.channels, config.hidden, rng);
  p.dec2_bias = Tensor::zeros({config.channels}, true);
  return p;
}

NamedTensors VqParams::named() const {
  return {
      {"enc1.kernel", enc1_kernel}, {"enc1.bias", enc1_bias},
      {"enc2.kernel", enc2_kernel}, {"enc2.bias", enc2_bias},
      {"codebook", codebook},
      {"dec1.kernel", dec1_kernel}, {"dec1.bias", dec1_bias},
      {"dec2.kernel", dec2_kernel}, {"dec2.bias", dec2_bias},
  };
}

std::vector<Tensor> VqParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named()) out.push_back(t);
  return out;
}

void VqParams::save(const std::string& path) const { save_checkpoint(path, named()); }

VqParams VqParams::load(const std::string& path, const VqConfig& config) {
  VqParams p = VqParams::init(config, 0);
  NamedTensors named = p.named();  // handles share nodes with p
  load_checkpoint(path, named);
  return p;
}

Tensor encode_frame(const Tensor& frame, const VqParams& params) {
  const auto& c = params.config;
  Tensor h1 = ad::relu(ad::add_channel_bias(
      ad::conv2d(frame, params.enc1_kernel, c.stride, c.pad), params.enc1_bias));
  return ad::add_channel_bias(ad::conv2d(h1, params.enc2_kernel, c.stride, c.pad),
                              params.enc2_bias);
}

std::vector<int> quantize(std::span<const double> latent_rows, size_t row_count,
                          const Tensor& codebook) {
  const size_t k = codebook.shape()[0];
  const size_t d = codebook.shape()[1];
  if (row_count == 0 || latent_rows.size() != row_count * d)
    throw DimensionError("quantize: latent size does not match row count and codebook width");
  const auto& cb = codebook.value();
  std::vector<int> out(row_count);
  for (size_t r = 0; r < row_count; ++r) {
    const double* y = latent_rows.data() + r * d;
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (size_t j = 0; j < k; ++j) {
      const double* b = cb.data() + j * d;
      double dist = 0.0;
      for (size_t c = 0; c < d; ++c) {
        const double diff = y[c] - b[c];
        dist += diff * diff;
      }
      if (dist < best) {  // strict: ties keep the lowest index
        best = dist;
        best_j = int(j);
      }
    }
    out[r] = best_j;
  }
  return out;
}

Tensor lookup(const std::vector<int>& indices, const Tensor& codebook) {
  return ad::embedding(codebook, indices);
}

Tensor decode_frame(const Tensor& latent, const VqParams& params) {
  const auto& c = params.config;
  Tensor h1 = ad::relu(ad::add_channel_bias(
      ad::conv_transpose2d(latent, params.dec1_kernel, c.stride, c.pad), params.dec1_bias));
  return ad::sigmoid(ad::add_channel_bias(
      ad::conv_transpose2d(h1, params.dec2_kernel, c.stride, c.pad), params.dec2_bias));
}

TokenGrid encode_video(const VideoTensor& video, const VqParams& params) {
  const auto& c = params.config;
  if (video.height != c.height || video.width != c.width || video.channels != c.channels)
    throw DimensionError("encode_video: video geometry does not match codec config");
  const size_t h = c.latent_rows(), w = c.latent_cols();
  TokenGrid grid(video.frames, h, w, c.codebook_size);
  for (size_t l = 0; l < video.frames; ++l) {
    Tensor y = encode_frame(frame_leaf(video, l), params);
    auto ids = quantize(y.value(), h * w, params.codebook);
    std::copy(ids.begin(), ids.end(), grid.indices.begin() + l * h * w);
  }
  return grid;
}

VideoTensor decode_tokens(const TokenGrid& tokens, const VqParams& params) {
  const auto& c = params.config;
  tokens.validate();
  if (tokens.rows != c.latent_rows() || tokens.cols != c.latent_cols() ||
      tokens.vocab != c.codebook_size)
    throw DimensionError("decode_tokens: token grid does not match codec config");
  VideoTensor video(tokens.frames, c.height, c.width, c.channels);
  const size_t cells = tokens.rows * tokens.cols;
  for (size_t l = 0; l < tokens.frames; ++l) {
    std::vector<int> ids(tokens.indices.begin() + l * cells,
                         tokens.indices.begin() + (l + 1) * cells);
    Tensor b = ad::reshape(lookup(ids, params.codebook),
                           {tokens.rows, tokens.cols, c.embed_dim});
    Tensor frame = decode_frame(b, params);
    std::copy(frame.value().begin(), frame.value().end(),
              video.pixels.begin() + l * video.frame_size());
  }
  return video;
}

VqLoss vqvae_loss(const VideoTensor& video, const VqParams& params) {
  const auto& c = params.config;
  if (video.height != c.height || video.width != c.width || video.channels != c.channels)
    throw DimensionError("vqvae_loss: video geometry does not match codec config");
  if (video.frames == 0) throw DimensionError("vqvae_loss: empty video");
  const size_t h = c.latent_rows(), w = c.latent_cols();

  Tensor rec_sum, cb_sum, commit_sum;
  for (size_t l = 0; l < video.frames; ++l) {
    Tensor x = frame_leaf(video, l);
    Tensor y = ad::reshape(encode_frame(x, params), {h * w, c.embed_dim});
    auto ids = quantize(y.value(), h * w, params.codebook);
    Tensor b = lookup(ids, params.codebook);

    // Straight-through: forward value is b, gradient flows to y unchanged.
    Tensor st = ad::add(y, ad::stop_gradient(ad::sub(b, y)));
    Tensor xhat = decode_frame(ad::reshape(st, {h, w, c.embed_dim}), params);

    Tensor rec = ad::sum_sq_diff(x, xhat);
    Tensor cb = ad::sum_sq_diff(ad::stop_gradient(y), b);
    Tensor commit = ad::sum_sq_diff(y, ad::stop_gradient(b));
    rec_sum = l == 0 ? rec : ad::add(rec_sum, rec);
    cb_sum = l == 0 ? cb : ad::add(cb_sum, cb);
    commit_sum = l == 0 ? commit : ad::add(commit_sum, commit);
  }

  const double inv_l = 1.0 / double(video.frames);
  Tensor rec_mean = ad::scale(rec_sum, inv_l);
  Tensor cb_mean = ad::scale(cb_sum, inv_l);
  Tensor commit_mean = ad::scale(commit_sum, inv_l);
  Tensor total = ad::add(rec_mean, ad::add(cb_mean, ad::scale(commit_mean, c.beta)));

  VqLoss out;
  out.total = total;
  out.breakdown.reconstruction = rec_mean.item();
  out.breakdown.codebook = cb_mean.item();
  out.breakdown.commitment = commit_mean.item();
  out.breakdown.beta = c.beta;
  out.breakdown.total = total.item();
  return out;
}

double reconstruction_mse(const VideoTensor& video, const VqParams& params) {
  VideoTensor rebuilt = decode_tokens(encode_video(video, params), params);
  double sum = 0.0;
  for (size_t i = 0; i < video.pixels.size(); ++i) {
    const double diff = video.pixels[i] - rebuilt.pixels[i];
    sum += diff * diff;
  }
  return sum / double(video.pixels.size());
}

VqParams train_vqvae(const std::vector<VideoTensor>& videos, const VqConfig& config,
                     const VqTrainConfig& train,
                     const std::function<void(const VqTrainStats&)>& log) {
  if (videos.empty()) throw TrainingError("train_vqvae: no training videos");
  VqParams params = VqParams::init(config, train.seed);
  ad::Adam opt(params.trainable(), {.lr = train.lr});
  auto order_rng = make_stream(train.seed, 0x76715f6f72646572ull);
  const size_t batch = std::max<size_t>(1, std::min(train.batch_videos, videos.size()));

  for (size_t step = 1; step <= train.steps; ++step) {
    opt.zero_grad();
    VqLossBreakdown mean{};
    for (size_t b = 0; b < batch; ++b) {
      const size_t pick = videos.size() == 1
                              ? 0
                              : size_t(uniform_below(order_rng, uint64_t(videos.size())));
      VqLoss loss = vqvae_loss(videos[pick], params);
      ad::backward(ad::scale(loss.total, 1.0 / double(batch)));
      mean.reconstruction += loss.breakdown.reconstruction / double(batch);
      mean.codebook += loss.breakdown.codebook / double(batch);
      mean.commitment += loss.breakdown.commitment / double(batch);
      mean.total += loss.breakdown.total / double(batch);
    }
    mean.beta = config.beta;
    if (!std::isfinite(mean.total))
      throw TrainingError("train_vqvae: non-finite loss at step " + std::to_string(step));
    opt.step();

    const bool periodic = train.log_every > 0 && step % train.log_every == 0;
    if (log && (periodic || step == train.steps)) {
      VqTrainStats stats;
      stats.step = step;
      stats.loss = mean;
      stats.pixel_mse = reconstruction_mse(videos[0], params);
      log(stats);
    }
  }
  return params;
}

}  // namespace gridvid::vq
