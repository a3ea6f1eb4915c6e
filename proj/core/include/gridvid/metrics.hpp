#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridvid/oracle.hpp"
#include "gridvid/video.hpp"

namespace gridvid::metrics {

// Mean over frames of oracle similarity between the text and each frame.
double sim(const std::string& text, const VideoTensor& video, const SimilarityOracle& oracle);

// Relative matching on a x100 scale: 100 * sim(pred) / sim(ground truth).
// Throws MetricError when the ground-truth similarity is not positive.
double rm(const std::string& text, const VideoTensor& predicted,
          const VideoTensor& ground_truth, const SimilarityOracle& oracle);

struct SamplePair {
  std::string text;
  VideoTensor predicted;
  VideoTensor ground_truth;
};

struct CorpusReport {
  struct Sample {
    double sim = 0.0;        // raw, in [-1, 1]
    double rm = 0.0;         // x100 scale; meaningless when !rm_defined
    bool rm_defined = true;
  };
  std::vector<Sample> samples;
  double mean_sim_x100 = 0.0;
  double mean_rm = 0.0;  // mean of per-sample ratios over defined samples
  size_t undefined_rm = 0;
  // sim_matrix[q][v] = sim of text q against predicted video v.
  std::vector<std::vector<double>> sim_matrix;
};

CorpusReport corpus_eval(const std::vector<SamplePair>& pairs, const SimilarityOracle& oracle);

void write_sim_matrix_csv(const std::string& path, const std::vector<std::string>& texts,
                          const std::vector<std::vector<double>>& matrix);

// One pairwise human judgment: on sample t, does model i beat model j?
// winner fields are 1 when i wins, 0 when j does.
struct JudgmentRecord {
  size_t sample = 0;    // t in [0, T)
  size_t model_i = 0;   // i in [0, N), i != j
  size_t model_j = 0;
  int realism_winner = 0;
  int consistency_winner = 0;
};

// Per-model scores (1/(N*T)) * sum over opponents and samples of win
// indicators. Records may state either or both orderings of a pair; a missing
// ordering is inferred as the complement, a contradictory duplicate throws
// MetricError.
std::vector<double> vr_aggregate(const std::vector<JudgmentRecord>& records, size_t n_models,
                                 size_t n_samples);
std::vector<double> sc_aggregate(const std::vector<JudgmentRecord>& records, size_t n_models,
                                 size_t n_samples);

}  // namespace gridvid::metrics
