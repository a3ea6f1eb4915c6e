#include "gridvid/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "gridvid/errors.hpp"

namespace gridvid::metrics {

double sim(const std::string& text, const VideoTensor& video, const SimilarityOracle& oracle) {
  if (video.frames == 0) throw MetricError("sim: video has no frames");
  const auto t = oracle.embed_text(text);
  if (t.size() != oracle.dim())
    throw ContractError("sim: oracle text embedding width != declared dim");
  double total = 0.0;
  for (size_t l = 0; l < video.frames; ++l) {
    const auto f = oracle.embed_frame(video, l);
    if (f.size() != t.size())
      throw ContractError("sim: oracle frame embedding width != declared dim");
    double dot = 0.0;
    for (size_t i = 0; i < t.size(); ++i) dot += t[i] * f[i];
    total += dot;
  }
  return total / double(video.frames);
}

double rm(const std::string& text, const VideoTensor& predicted,
          const VideoTensor& ground_truth, const SimilarityOracle& oracle) {
  const double denom = sim(text, ground_truth, oracle);
  if (!(denom > 0.0))
    throw MetricError("rm: ground-truth similarity " + std::to_string(denom) +
                      " is not positive for text '" + text + "'");
  return 100.0 * sim(text, predicted, oracle) / denom;
}

CorpusReport corpus_eval(const std::vector<SamplePair>& pairs, const SimilarityOracle& oracle) {
  if (pairs.empty()) throw MetricError("corpus_eval: empty corpus");
  CorpusReport report;
  double sim_sum = 0.0, rm_sum = 0.0;
  size_t rm_count = 0;
  for (const auto& pair : pairs) {
    CorpusReport::Sample s;
    s.sim = sim(pair.text, pair.predicted, oracle);
    try {
      s.rm = rm(pair.text, pair.predicted, pair.ground_truth, oracle);
    } catch (const MetricError&) {
      s.rm_defined = false;
      ++report.undefined_rm;
    }
    sim_sum += s.sim;
    if (s.rm_defined) {
      rm_sum += s.rm;
      ++rm_count;
    }
    report.samples.push_back(s);
  }
  report.mean_sim_x100 = 100.0 * sim_sum / double(pairs.size());
  report.mean_rm = rm_count ? rm_sum / double(rm_count) : 0.0;

  report.sim_matrix.resize(pairs.size());
  for (size_t q = 0; q < pairs.size(); ++q) {
    report.sim_matrix[q].resize(pairs.size());
    for (size_t v = 0; v < pairs.size(); ++v)
      report.sim_matrix[q][v] = sim(pairs[q].text, pairs[v].predicted, oracle);
  }
  return report;
}

void write_sim_matrix_csv(const std::string& path, const std::vector<std::string>& texts,
                          const std::vector<std::vector<double>>& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_sim_matrix_csv: cannot open " + path);
  out << "text";
  for (size_t v = 0; v < matrix.size(); ++v) out << ",video_" << v;
  out << "\n";
  for (size_t q = 0; q < matrix.size(); ++q) {
    std::string quoted = texts.at(q);
    for (size_t pos = 0; (pos = quoted.find('"', pos)) != std::string::npos; pos += 2)
      quoted.replace(pos, 1, "\"\"");
    out << '"' << quoted << '"';
    char buf[32];
    for (double v : matrix[q]) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    }
    out << "\n";
  }
}

namespace {

std::vector<double> aggregate(const std::vector<JudgmentRecord>& records, size_t n_models,
                              size_t n_samples, bool realism) {
  if (n_models < 2) throw MetricError("aggregate: need at least two models");
  if (n_samples < 1) throw MetricError("aggregate: need at least one sample");

  // wins[(t, i, j)] = 1 if i beat j on sample t.
  std::map<std::tuple<size_t, size_t, size_t>, int> wins;
  for (const auto& r : records) {
    if (r.model_i == r.model_j) throw MetricError("aggregate: record compares a model to itself");
    if (r.model_i >= n_models || r.model_j >= n_models)
      throw MetricError("aggregate: model index out of range");
    if (r.sample >= n_samples) throw MetricError("aggregate: sample index out of range");
    const int w = realism ? r.realism_winner : r.consistency_winner;
    if (w != 0 && w != 1) throw MetricError("aggregate: winner must be 0 or 1");
    const auto key = std::make_tuple(r.sample, r.model_i, r.model_j);
    const auto mirror = std::make_tuple(r.sample, r.model_j, r.model_i);
    if (auto it = wins.find(key); it != wins.end() && it->second != w)
      throw MetricError("aggregate: contradictory duplicate record");
    if (auto it = wins.find(mirror); it != wins.end() && it->second != 1 - w)
      throw MetricError("aggregate: contradictory paired records");
    wins[key] = w;
    wins[mirror] = 1 - w;
  }

  std::vector<double> score(n_models, 0.0);
  for (const auto& [key, w] : wins) score[std::get<1>(key)] += double(w);
  const double denom = double(n_models) * double(n_samples);
  for (double& s : score) s /= denom;
  return score;
}

}  // namespace

std::vector<double> vr_aggregate(const std::vector<JudgmentRecord>& records, size_t n_models,
                                 size_t n_samples) {
  return aggregate(records, n_models, n_samples, true);
}

std::vector<double> sc_aggregate(const std::vector<JudgmentRecord>& records, size_t n_models,
                                 size_t n_samples) {
  return aggregate(records, n_models, n_samples, false);
}

}  // namespace gridvid::metrics
