#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridvid/glyphs.hpp"
#include "gridvid/video.hpp"

namespace gridvid::vq {
struct VqParams;
}

namespace gridvid::data {

// The six digit motions. "Plain" motions bounce off the canvas edges; "then"
// motions go one way, turn once at a fixed frame, and come back.
enum class Motion {
  UpDown,
  LeftRight,
  LeftThenRight,
  RightThenLeft,
  UpThenDown,
  DownThenUp,
};

inline constexpr size_t kMotionCount = 6;
std::array<Motion, kMotionCount> all_motions();
const char* motion_phrase(Motion m);  // e.g. "up and down", "down then up"
Motion motion_from_phrase(const std::string& phrase);

struct SceneConfig {
  size_t frames = 4;
  size_t height = 16, width = 16;
  size_t speed = 2;  // pixels per frame step
  void validate() const;
};

struct DigitSpec {
  int digit = 0;  // glyph id in [0,9]
  Motion motion = Motion::UpDown;
  size_t start_row = 0, start_col = 0;  // top-left corner of the glyph
};

struct SceneSpec {
  SceneConfig config;
  std::vector<DigitSpec> digits;        // 1 or 2 entries
  std::optional<size_t> turn_frame;     // for "then" motions; default frames/2
  size_t turn() const { return turn_frame.value_or(config.frames / 2); }
  void validate() const;
};

// Glyph top-left corner per frame under the piecewise-linear motion rules
// (constant speed, one turn for "then" motions, edge reflection otherwise).
// This is the ground truth the renderer, the classifier, and the toy oracle
// all share.
std::vector<std::pair<long, long>> trajectory(Motion m, long start_row, long start_col,
                                              const SceneConfig& config, size_t turn,
                                              size_t glyph_h = kGlyphSize,
                                              size_t glyph_w = kGlyphSize);

// Top-left positions from which a "then" motion never touches a canvas edge,
// so its shape is purely piecewise-linear. Plain motions admit every
// in-canvas start.
std::vector<std::pair<long, long>> canonical_starts(Motion m, const SceneConfig& config,
                                                    size_t turn,
                                                    size_t glyph_h = kGlyphSize,
                                                    size_t glyph_w = kGlyphSize);

// Deterministic rendering; overlapping digits compose by per-pixel max.
VideoTensor render_scene(const SceneSpec& spec);

// Canonical caption, lowercased:
//   "digit 9 is moving down then up"
//   "digit 7 moves right then left while digit 3 moves down then up"
std::string caption(const SceneSpec& spec);

// Which motions are consistent with a single-digit video: motions whose
// trajectory from the observed start matches every observed centroid within
// one pixel. Distinct motions can coincide from some starts, hence a set.
std::vector<Motion> classify_motions(const VideoTensor& video, const SceneConfig& config,
                                     size_t turn);

// Per-frame glyph centroid (pixel mass mean), rows then cols.
std::vector<std::pair<double, double>> centroid_track(const VideoTensor& video);

struct DatasetBuildConfig {
  SceneConfig scene;
  size_t count = 100;
  double train_ratio = 0.8;
  size_t max_digits = 2;  // sampled scenes carry 1..max_digits digits
  uint64_t seed = 0;
  // (digit, motion) combinations barred from the training split. Scenes
  // containing one are moved to validation; one synthetic scene per pair is
  // appended if sampling produced none.
  std::vector<std::pair<int, Motion>> holdout;
};

struct DatasetItem {
  size_t id = 0;
  std::string split;  // "train" | "val"
  SceneSpec spec;
  std::string caption;
  std::string video_path;
  std::string tokens_path;  // empty unless a quantizer was supplied
};

// Writes videos (and token grids when `vq` is given) plus manifest.jsonl
// under out_dir. Fully deterministic for a fixed config.
std::vector<DatasetItem> build_dataset(const std::string& out_dir,
                                       const DatasetBuildConfig& config,
                                       const vq::VqParams* vq = nullptr);

// Draws a random scene; stream index `id` makes each scene independently
// reproducible.
SceneSpec sample_scene(const DatasetBuildConfig& config, uint64_t id);

}  // namespace gridvid::data
