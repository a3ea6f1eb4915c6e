#include "gridvid/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridvid/adam.hpp"
#include "gridvid/errors.hpp"
#include "gridvid/ops.hpp"
#include "gridvid/rng.hpp"

namespace gridvid::dec {

using ad::Tensor;

void DecoderConfig::validate() const {
  if (frames == 0 || rows == 0 || cols == 0)
    throw ConfigError("decoder config: empty token grid");
  if (text_len == 0 || text_vocab == 0) throw ConfigError("decoder config: empty text space");
  if (vocab == 0 || codebook_dim == 0) throw ConfigError("decoder config: empty token space");
  if (dim == 0 || heads == 0 || dim % heads != 0)
    throw ConfigError("decoder config: dim must be a positive multiple of heads");
  if (layers < 3 || layers % 3 != 0)
    throw ConfigError("decoder config: layers must be >= 3 and a multiple of 3");
  if (ff_mult == 0) throw ConfigError("decoder config: ff_mult must be positive");
}

namespace {

Tensor init_linear(size_t in, size_t out, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / double(in));
  std::vector<double> data(in * out);
  for (double& v : data) v = uniform_range(rng, -bound, bound);
  return Tensor::from_data({in, out}, data, true);
}

Tensor init_table(size_t rows, size_t cols, std::mt19937_64& rng, double scale = 0.02) {
  std::vector<double> data(rows * cols);
  for (double& v : data) v = uniform_range(rng, -scale, scale);
  return Tensor::from_data({rows, cols}, data, true);
}

std::vector<int> iota_ids(size_t first, size_t count) {
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), int(first));
  return ids;
}

}  // namespace

DecoderParams DecoderParams::init(const DecoderConfig& config, const Tensor& codebook,
                                  uint64_t seed) {
  config.validate();
  if (!codebook.defined() || codebook.shape().size() != 2 ||
      codebook.shape()[0] != config.vocab || codebook.shape()[1] != config.codebook_dim)
    throw DimensionError("decoder init: codebook must be [vocab x codebook_dim]");
  auto rng = make_stream(seed, 0x6465635f696e6974ull);

  DecoderParams p;
  p.config = config;
  p.text_embed = init_table(config.text_vocab, config.dim, rng);
  p.text_pos = init_table(config.text_len, config.dim, rng);
  p.video_pos = init_table(config.cells(), config.dim, rng);
  p.bov = init_table(1, config.dim, rng);
  p.w_in = init_linear(config.codebook_dim, config.dim, rng);
  // Frozen snapshot: gradients never flow into the quantizer's codebook.
  p.codebook = Tensor::from_data(codebook.shape(),
                                 {codebook.value().begin(), codebook.value().end()}, false);

  const size_t fd = config.ff_mult * config.dim;
  p.layer.resize(config.layers);
  for (auto& lp : p.layer) {
    lp.ln1_gain = Tensor::full({config.dim}, 1.0, true);
    lp.ln1_bias = Tensor::zeros({config.dim}, true);
    lp.wq = init_linear(config.dim, config.dim, rng);
    lp.wk = init_linear(config.dim, config.dim, rng);
    lp.wv = init_linear(config.dim, config.dim, rng);
    lp.wo = init_linear(config.dim, config.dim, rng);
    lp.ln2_gain = Tensor::full({config.dim}, 1.0, true);
    lp.ln2_bias = Tensor::zeros({config.dim}, true);
    lp.ff1_w = init_linear(config.dim, fd, rng);
    lp.ff1_b = Tensor::zeros({fd}, true);
    lp.ff2_w = init_linear(fd, config.dim, rng);
    lp.ff2_b = Tensor::zeros({config.dim}, true);
  }
  p.final_ln_gain = Tensor::full({config.dim}, 1.0, true);
  p.final_ln_bias = Tensor::zeros({config.dim}, true);
  p.w_out = init_linear(config.dim, config.vocab, rng);
  p.b_out = Tensor::zeros({config.vocab}, true);
  return p;
}

NamedTensors DecoderParams::named() const {
  NamedTensors out = {
      {"text_embed", text_embed}, {"text_pos", text_pos}, {"video_pos", video_pos},
      {"bov", bov},               {"w_in", w_in},         {"codebook", codebook},
  };
  for (size_t r = 0; r < layer.size(); ++r) {
    const std::string base = "layer" + std::to_string(r) + ".";
    const auto& lp = layer[r];
    out.emplace_back(base + "ln1.gain", lp.ln1_gain);
    out.emplace_back(base + "ln1.bias", lp.ln1_bias);
    out.emplace_back(base + "wq", lp.wq);
    out.emplace_back(base + "wk", lp.wk);
    out.emplace_back(base + "wv", lp.wv);
    out.emplace_back(base + "wo", lp.wo);
    out.emplace_back(base + "ln2.gain", lp.ln2_gain);
    out.emplace_back(base + "ln2.bias", lp.ln2_bias);
    out.emplace_back(base + "ff1.w", lp.ff1_w);
    out.emplace_back(base + "ff1.b", lp.ff1_b);
    out.emplace_back(base + "ff2.w", lp.ff2_w);
    out.emplace_back(base + "ff2.b", lp.ff2_b);
  }
  out.emplace_back("final.ln.gain", final_ln_gain);
  out.emplace_back("final.ln.bias", final_ln_bias);
  out.emplace_back("final.w_out", w_out);
  out.emplace_back("final.b_out", b_out);
  return out;
}

std::vector<Tensor> DecoderParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named())
    if (name != "codebook") out.push_back(t);
  return out;
}

void DecoderParams::save(const std::string& path) const { save_checkpoint(path, named()); }

DecoderParams DecoderParams::load(const std::string& path, const DecoderConfig& config) {
  Tensor placeholder = Tensor::zeros({config.vocab, config.codebook_dim}, false);
  DecoderParams p = DecoderParams::init(config, placeholder, 0);
  NamedTensors named = p.named();  // handles share nodes with p
  load_checkpoint(path, named);
  return p;
}

Tensor embed_text(const TextSequence& text, const DecoderParams& params) {
  const auto& c = params.config;
  text.validate();
  if (text.padded_length() != c.text_len || text.vocab_size != c.text_vocab)
    throw DimensionError("embed_text: text geometry does not match decoder config");
  return ad::add(ad::embedding(params.text_embed, text.ids), params.text_pos);
}

Tensor embed_video_tokens(const Tensor& b, const DecoderParams& params) {
  const auto& c = params.config;
  if (b.shape().size() != 2 || b.shape()[0] != c.cells() || b.shape()[1] != c.codebook_dim)
    throw DimensionError("embed_video_tokens: expected [M x codebook_dim] input");
  return ad::add(ad::matmul(b, params.w_in), params.video_pos);
}

namespace {

// Shifted decoder inputs: row 0 is the begin-of-video embedding, row m >= 1
// carries token m-1, every row gets its grid position added.
Tensor shifted_inputs(std::span<const int> tokens, size_t n_rows, const DecoderParams& p) {
  Tensor first = ad::add(p.bov, ad::embedding(p.video_pos, {0}));
  if (n_rows == 1) return first;
  std::vector<int> prefix(tokens.begin(), tokens.begin() + long(n_rows - 1));
  Tensor lifted = ad::matmul(ad::embedding(p.codebook, prefix), p.w_in);
  Tensor rest = ad::add(lifted, ad::embedding(p.video_pos, iota_ids(1, n_rows - 1)));
  return ad::concat_rows(first, rest);
}

Tensor feed_forward(const Tensor& x, const DecoderLayerParams& lp) {
  Tensor h = ad::relu(ad::add_bias(ad::matmul(x, lp.ff1_w), lp.ff1_b));
  return ad::add_bias(ad::matmul(h, lp.ff2_w), lp.ff2_b);
}

}  // namespace

Tensor decoder_forward(const TextSequence& text, std::span<const int> tokens,
                       const DecoderParams& params, const attn::PatternSet& patterns) {
  const auto& c = params.config;
  if (patterns.grid != c.grid())
    throw DimensionError("decoder_forward: pattern grid does not match decoder config");
  const size_t m = c.cells();
  if (tokens.size() > m)
    throw DimensionError("decoder_forward: token prefix longer than the grid");
  for (int id : tokens)
    if (id < 0 || size_t(id) >= c.vocab)
      throw IndexError("decoder_forward: token id out of range");

  const size_t n_rows = std::min(tokens.size() + 1, m);
  const size_t n_text = text.length();

  Tensor t_full = embed_text(text, params);
  Tensor t_act = ad::embedding(t_full, iota_ids(0, n_text));  // non-pad rows only
  Tensor x = shifted_inputs(tokens, n_rows, params);

  for (size_t r = 0; r < c.layers; ++r) {
    const auto& lp = params.layer[r];
    const auto& pattern = patterns.for_layer(r);
    Tensor xn = ad::layer_norm(x, lp.ln1_gain, lp.ln1_bias);
    Tensor tn = ad::layer_norm(t_act, lp.ln1_gain, lp.ln1_bias);
    Tensor kv_in = ad::concat_rows(tn, xn);
    Tensor att = attn::sparse_attention_core(ad::matmul(xn, lp.wq), ad::matmul(kv_in, lp.wk),
                                             ad::matmul(kv_in, lp.wv), pattern, n_text, c.heads);
    x = ad::add(x, ad::matmul(att, lp.wo));
    x = ad::add(x, feed_forward(ad::layer_norm(x, lp.ln2_gain, lp.ln2_bias), lp));
  }

  Tensor final = ad::layer_norm(x, params.final_ln_gain, params.final_ln_bias);
  return ad::add_bias(ad::matmul(final, params.w_out), params.b_out);
}

Tensor decoder_loss(const TextSequence& text, const TokenGrid& tokens,
                    const DecoderParams& params, const attn::PatternSet& patterns) {
  const auto& c = params.config;
  tokens.validate();
  if (tokens.frames != c.frames || tokens.rows != c.rows || tokens.cols != c.cols ||
      tokens.vocab != c.vocab)
    throw DimensionError("decoder_loss: token grid geometry does not match decoder config");
  Tensor logits = decoder_forward(text, tokens.indices, params, patterns);
  return ad::cross_entropy(logits, tokens.indices);
}

DecoderParams train_decoder(const std::vector<std::pair<TextSequence, TokenGrid>>& pairs,
                            const DecoderConfig& config, const Tensor& codebook,
                            const GenTrainConfig& train,
                            const std::function<void(const GenTrainStats&)>& log) {
  if (pairs.empty()) throw TrainingError("train_decoder: no training pairs");
  DecoderParams params = DecoderParams::init(config, codebook, train.seed);
  attn::PatternSet patterns = attn::build_patterns(config.grid());
  ad::Adam opt(params.trainable(), {.lr = train.lr});
  auto order_rng = make_stream(train.seed, 0x6465635f6f726472ull);
  const size_t batch = std::max<size_t>(1, std::min(train.batch, pairs.size()));

  for (size_t step = 1; step <= train.steps; ++step) {
    opt.zero_grad();
    double mean_loss = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const size_t pick =
          pairs.size() == 1 ? 0 : size_t(uniform_below(order_rng, uint64_t(pairs.size())));
      Tensor loss = decoder_loss(pairs[pick].first, pairs[pick].second, params, patterns);
      ad::backward(ad::scale(loss, 1.0 / double(batch)));
      mean_loss += loss.item() / double(batch);
    }
    if (!std::isfinite(mean_loss))
      throw TrainingError("train_decoder: non-finite loss at step " + std::to_string(step));
    opt.step();
    const bool periodic = train.log_every > 0 && step % train.log_every == 0;
    if (log && (periodic || step == train.steps)) log({step, mean_loss});
  }
  return params;
}

}  // namespace gridvid::dec
