#include "gridvid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridvid/errors.hpp"
#include "gridvid/metrics.hpp"
#include "gridvid/ops.hpp"
#include "gridvid/rng.hpp"

namespace gridvid::sampling {

Strategy strategy_from_name(const std::string& name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "top-k" || name == "topk") return Strategy::TopK;
  throw ConfigError("unknown sampling strategy '" + name + "' (use greedy or top-k)");
}

const char* strategy_name(Strategy s) {
  return s == Strategy::Greedy ? "greedy" : "top-k";
}

void SamplingConfig::validate(size_t vocab) const {
  if (strategy == Strategy::TopK && (k < 1 || k > vocab))
    throw ConfigError("sampling config: k must be in [1, vocab]");
  if (!(temperature > 0.0)) throw ConfigError("sampling config: temperature must be > 0");
  if (candidates < 1) throw ConfigError("sampling config: need at least one candidate");
}

int argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax_lowest: empty input");
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return int(best);
}

std::vector<double> softmax_probs(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw ContractError("softmax_probs: empty input");
  if (!(temperature > 0.0)) throw ContractError("softmax_probs: temperature must be > 0");
  std::vector<double> out(logits.size());
  double max_z = -std::numeric_limits<double>::infinity();
  for (double z : logits) max_z = std::max(max_z, z / temperature);
  double denom = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - max_z);
    denom += out[i];
  }
  for (double& p : out) p /= denom;
  return out;
}

int top_k_sample(std::span<const double> probs, size_t k, std::mt19937_64& rng) {
  if (probs.empty()) throw ContractError("top_k_sample: empty distribution");
  if (k < 1 || k > probs.size())
    throw ContractError("top_k_sample: k must be in [1, " + std::to_string(probs.size()) + "]");
  double total = 0.0;
  for (double p : probs) total += p;
  if (std::abs(total - 1.0) > 1e-6)
    throw ContractError("top_k_sample: input is not a distribution (sum " +
                        std::to_string(total) + ")");

  // Stable sort by descending probability keeps equal entries lowest-index
  // first, which settles ties at the k-th value.
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&probs](int a, int b) { return probs[size_t(a)] > probs[size_t(b)]; });
  order.resize(k);

  double mass = 0.0;
  for (int idx : order) mass += probs[size_t(idx)];
  const double u = uniform01(rng) * mass;
  double cum = 0.0;
  for (int idx : order) {
    cum += probs[size_t(idx)];
    if (u < cum) return idx;
  }
  return order.back();
}

TokenGrid generate(const TextSequence& text, const dec::DecoderParams& params,
                   const attn::PatternSet& patterns, const SamplingConfig& config,
                   uint64_t candidate_index) {
  const auto& c = params.config;
  config.validate(c.vocab);
  auto rng = make_stream(config.seed, candidate_index);

  std::vector<int> emitted;
  emitted.reserve(c.cells());
  for (size_t m = 0; m < c.cells(); ++m) {
    ad::Tensor logits = dec::decoder_forward(text, emitted, params, patterns);
    const size_t last = logits.shape()[0] - 1;
    std::span<const double> row(logits.value().data() + last * c.vocab, c.vocab);
    if (config.strategy == Strategy::Greedy) {
      emitted.push_back(argmax_lowest(row));
    } else {
      const auto probs = softmax_probs(row, config.temperature);
      emitted.push_back(top_k_sample(probs, config.k, rng));
    }
  }

  TokenGrid grid(c.frames, c.rows, c.cols, c.vocab);
  grid.indices = std::move(emitted);
  return grid;
}

BestOfN best_of_n(const TextSequence& text, const std::string& caption_text,
                  const dec::DecoderParams& params, const attn::PatternSet& patterns,
                  const vq::VqParams& vq_params, const SamplingConfig& config,
                  const SimilarityOracle& oracle) {
  config.validate(params.config.vocab);
  BestOfN result;
  for (size_t j = 0; j < config.candidates; ++j) {
    Candidate cand;
    cand.index = j;
    cand.tokens = generate(text, params, patterns, config, j);
    cand.video = vq::decode_tokens(cand.tokens, vq_params);
    try {
      cand.score = metrics::sim(caption_text, cand.video, oracle);
    } catch (const OracleError& e) {
      throw OracleError("candidate " + std::to_string(j) + ": " + e.what());
    }
    if (j == 0 || cand.score > result.best_score) {
      result.best_index = j;
      result.best_score = cand.score;
    }
    result.candidates.push_back(std::move(cand));
  }
  return result;
}

}  // namespace gridvid::sampling
