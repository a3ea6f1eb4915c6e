#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridvid/decoder.hpp"
#include "gridvid/oracle.hpp"
#include "gridvid/token_grid.hpp"
#include "gridvid/video.hpp"
#include "gridvid/vq_codec.hpp"

namespace gridvid::sampling {

enum class Strategy { Greedy, TopK };
Strategy strategy_from_name(const std::string& name);  // "greedy" | "top-k"
const char* strategy_name(Strategy s);

struct SamplingConfig {
  Strategy strategy = Strategy::TopK;
  size_t k = 10;
  double temperature = 1.0;  // applied to logits before top-k truncation
  size_t candidates = 32;    // n, for best_of_n
  uint64_t seed = 0;

  void validate(size_t vocab) const;
};

// Argmax with ties resolved to the lowest index.
int argmax_lowest(std::span<const double> values);

// Renormalizes the k largest probabilities and samples one index from them.
// Ties at the k-th largest value are admitted lowest-index-first. Input must
// sum to 1 within 1e-6.
int top_k_sample(std::span<const double> probs, size_t k, std::mt19937_64& rng);

// Softmax with temperature, plain values in/out.
std::vector<double> softmax_probs(std::span<const double> logits, double temperature);

// Emits all grid tokens in raster order, each conditioned on the text and the
// tokens before it. candidate_index selects an independent RNG stream from
// config.seed, so every candidate is individually reproducible.
TokenGrid generate(const TextSequence& text, const dec::DecoderParams& params,
                   const attn::PatternSet& patterns, const SamplingConfig& config,
                   uint64_t candidate_index = 0);

struct Candidate {
  size_t index = 0;
  TokenGrid tokens;
  VideoTensor video;
  double score = 0.0;
};

struct BestOfN {
  size_t best_index = 0;  // earliest candidate reaching the max score
  double best_score = 0.0;
  std::vector<Candidate> candidates;  // in candidate-index order

  const Candidate& best() const { return candidates[best_index]; }
};

// Generates config.candidates candidates, decodes each through the quantizer
// decoder, scores each with mean per-frame oracle similarity against the
// caption, and keeps the earliest maximum. Oracle failures are rethrown with
// the candidate index attached.
BestOfN best_of_n(const TextSequence& text, const std::string& caption_text,
                  const dec::DecoderParams& params, const attn::PatternSet& patterns,
                  const vq::VqParams& vq_params, const SamplingConfig& config,
                  const SimilarityOracle& oracle);

}  // namespace gridvid::sampling
