#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gridvid/dataset.hpp"
#include "gridvid/video.hpp"

namespace gridvid {

// Text/frame embedding contract: unit vectors of a fixed dimension whose dot
// product is the similarity. Deterministic for fixed inputs.
class SimilarityOracle {
 public:
  virtual ~SimilarityOracle() = default;
  virtual size_t dim() const = 0;
  virtual std::vector<double> embed_text(const std::string& text) const = 0;
  virtual std::vector<double> embed_frame(const VideoTensor& video, size_t frame) const = 0;
};

// Hand-built embedding space for the synthetic digit scenes: 10 digit-identity
// slots plus one 3x3 pixel-mass histogram block per frame. Text-side digit
// slots are one-hot from the caption; frame-side slots are glyph template
// correlations. Motion words map to position signatures: per frame, the cell
// histogram of the motion's canonical trajectories averaged over every start
// that avoids the canvas edges. A frame embedding fills only its own block,
// so similarity compares positions frame by frame — "down then up" and "up
// then down" visit the same cells overall but in opposite temporal order.
// Not a learned model — a deterministic contract exerciser.
class ToyOracle : public SimilarityOracle {
 public:
  explicit ToyOracle(const data::SceneConfig& scene, size_t turn_frame);
  explicit ToyOracle(const data::SceneConfig& scene);  // turn at frames/2

  size_t dim() const override { return 10 + kCells * scene_.frames; }
  std::vector<double> embed_text(const std::string& text) const override;
  std::vector<double> embed_frame(const VideoTensor& video, size_t frame) const override;

  // Per-frame mean 3x3 mass histograms over the motion's canonical
  // trajectories, concatenated frame-major (kCells * frames wide); the
  // position part of a single-digit caption embedding before normalization.
  const std::vector<double>& motion_signature(data::Motion m) const;

 private:
  static constexpr size_t kCells = 9;
  data::SceneConfig scene_;
  size_t turn_;
  std::vector<std::vector<double>> signatures_;  // one per motion

  std::vector<double> cell_histogram(const VideoTensor& video, size_t frame) const;
};

struct HttpOracleConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  size_t dim = 0;        // expected embedding width
  double timeout_s = 5.0;
  size_t retries = 2;  // connection retries after the first attempt
};

// Client for an external embedding endpoint. POST {base_url}/embed with JSON
//   {"kind":"text","text":"..."}                                  or
//   {"kind":"frame","height":H,"width":W,"channels":C,"pixels":[...]}
// expecting {"embedding":[...]} back: a finite unit vector of the configured
// dimension. Anything else (bad status, malformed body, wrong width,
// non-finite or non-unit vector, exhausted retries) throws OracleError.
class HttpOracle : public SimilarityOracle {
 public:
  explicit HttpOracle(HttpOracleConfig config);
  ~HttpOracle() override;

  size_t dim() const override { return config_.dim; }
  std::vector<double> embed_text(const std::string& text) const override;
  std::vector<double> embed_frame(const VideoTensor& video, size_t frame) const override;

 private:
  HttpOracleConfig config_;
  struct Impl;
  std::unique_ptr<Impl> impl_;

  std::vector<double> post(const std::string& body) const;
};

}  // namespace gridvid
