#include "gridvid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "gridvid/errors.hpp"
#include "gridvid/rng.hpp"
#include "gridvid/token_grid.hpp"
#include "gridvid/vq_codec.hpp"

namespace fs = std::filesystem;

namespace gridvid::data {

std::array<Motion, kMotionCount> all_motions() {
  return {Motion::UpDown,        Motion::LeftRight,   Motion::LeftThenRight,
          Motion::RightThenLeft, Motion::UpThenDown,  Motion::DownThenUp};
}

const char* motion_phrase(Motion m) {
  switch (m) {
    case Motion::UpDown: return "up and down";
    case Motion::LeftRight: return "left and right";
    case Motion::LeftThenRight: return "left then right";
    case Motion::RightThenLeft: return "right then left";
    case Motion::UpThenDown: return "up then down";
    case Motion::DownThenUp: return "down then up";
  }
  throw ConfigError("motion_phrase: bad motion value");
}

Motion motion_from_phrase(const std::string& phrase) {
  for (Motion m : all_motions())
    if (phrase == motion_phrase(m)) return m;
  throw ConfigError("motion_from_phrase: unknown phrase '" + phrase + "'");
}

void SceneConfig::validate() const {
  if (frames < 1) throw ConfigError("scene config: frames must be >= 1");
  if (height < kGlyphSize || width < kGlyphSize)
    throw ConfigError("scene config: glyph larger than canvas");
  if (speed < 1) throw ConfigError("scene config: speed must be >= 1");
}

void SceneSpec::validate() const {
  config.validate();
  if (digits.empty() || digits.size() > 2)
    throw ConfigError("scene spec: scenes hold 1 or 2 digits");
  if (turn_frame && *turn_frame >= config.frames)
    throw ConfigError("scene spec: turn frame beyond the last frame");
  const long max_r = long(config.height - kGlyphSize);
  const long max_c = long(config.width - kGlyphSize);
  for (const auto& d : digits) {
    if (d.digit < 0 || d.digit > 9) throw ConfigError("scene spec: digit must be in [0,9]");
    if (long(d.start_row) > max_r || long(d.start_col) > max_c)
      throw ConfigError("scene spec: start position pushes the glyph off canvas");
  }
}

namespace {

struct Dir {
  long dr = 0, dc = 0;
};

// First- and second-phase directions; plain motions only ever use the first
// (edge reflection does the turning).
std::pair<Dir, Dir> motion_dirs(Motion m) {
  switch (m) {
    case Motion::UpDown: return {{-1, 0}, {1, 0}};
    case Motion::LeftRight: return {{0, -1}, {0, 1}};
    case Motion::LeftThenRight: return {{0, -1}, {0, 1}};
    case Motion::RightThenLeft: return {{0, 1}, {0, -1}};
    case Motion::UpThenDown: return {{-1, 0}, {1, 0}};
    case Motion::DownThenUp: return {{1, 0}, {-1, 0}};
  }
  throw ConfigError("motion_dirs: bad motion value");
}

bool is_plain(Motion m) { return m == Motion::UpDown || m == Motion::LeftRight; }

// Reflects v into [0, max]; flips d when a wall was hit.
void reflect(long& v, long max, long& d, bool& hit) {
  if (v < 0) {
    v = -v;
    d = -d;
    hit = true;
  } else if (v > max) {
    v = 2 * max - v;
    d = -d;
    hit = true;
  }
}

std::vector<std::pair<long, long>> trajectory_impl(Motion m, long r, long c,
                                                   const SceneConfig& config, size_t turn,
                                                   size_t glyph_h, size_t glyph_w,
                                                   bool* reflected) {
  const long max_r = long(config.height - glyph_h);
  const long max_c = long(config.width - glyph_w);
  if (r < 0 || r > max_r || c < 0 || c > max_c)
    throw ConfigError("trajectory: start position pushes the glyph off canvas");
  auto [first, second] = motion_dirs(m);
  const bool plain = is_plain(m);
  bool hit = false;
  std::vector<std::pair<long, long>> out;
  out.reserve(config.frames);
  out.emplace_back(r, c);
  Dir dir = first;
  for (size_t t = 1; t < config.frames; ++t) {
    if (!plain && t > turn) dir = second;
    r += dir.dr * long(config.speed);
    c += dir.dc * long(config.speed);
    reflect(r, max_r, dir.dr, hit);
    reflect(c, max_c, dir.dc, hit);
    if (r < 0 || r > max_r || c < 0 || c > max_c)
      throw ConfigError("trajectory: speed too large for the canvas");
    out.emplace_back(r, c);
  }
  if (reflected) *reflected = hit;
  return out;
}

}  // namespace

std::vector<std::pair<long, long>> trajectory(Motion m, long start_row, long start_col,
                                              const SceneConfig& config, size_t turn,
                                              size_t glyph_h, size_t glyph_w) {
  return trajectory_impl(m, start_row, start_col, config, turn, glyph_h, glyph_w, nullptr);
}

std::vector<std::pair<long, long>> canonical_starts(Motion m, const SceneConfig& config,
                                                    size_t turn, size_t glyph_h,
                                                    size_t glyph_w) {
  const long max_r = long(config.height - glyph_h);
  const long max_c = long(config.width - glyph_w);
  std::vector<std::pair<long, long>> out;
  for (long r = 0; r <= max_r; ++r) {
    for (long c = 0; c <= max_c; ++c) {
      if (is_plain(m)) {
        out.emplace_back(r, c);  // reflection is the defined behavior
        continue;
      }
      bool hit = false;
      trajectory_impl(m, r, c, config, turn, glyph_h, glyph_w, &hit);
      if (!hit) out.emplace_back(r, c);
    }
  }
  return out;
}

VideoTensor render_scene(const SceneSpec& spec) {
  spec.validate();
  const auto& cfg = spec.config;
  VideoTensor video(cfg.frames, cfg.height, cfg.width, 1);
  for (const auto& d : spec.digits) {
    const Glyph glyph = glyph_from_digit(d.digit);
    const auto path = trajectory(d.motion, long(d.start_row), long(d.start_col), cfg,
                                 spec.turn(), glyph.height, glyph.width);
    for (size_t l = 0; l < cfg.frames; ++l) {
      const auto [r, c] = path[l];
      for (size_t y = 0; y < glyph.height; ++y)
        for (size_t x = 0; x < glyph.width; ++x) {
          double& px = video.at(l, size_t(r) + y, size_t(c) + x, 0);
          px = std::max(px, glyph.at(y, x));
        }
    }
  }
  return video;
}

std::string caption(const SceneSpec& spec) {
  spec.validate();
  if (spec.digits.size() == 1) {
    const auto& d = spec.digits[0];
    return "digit " + std::to_string(d.digit) + " is moving " + motion_phrase(d.motion);
  }
  const auto& a = spec.digits[0];
  const auto& b = spec.digits[1];
  return "digit " + std::to_string(a.digit) + " moves " + motion_phrase(a.motion) +
         " while digit " + std::to_string(b.digit) + " moves " + motion_phrase(b.motion);
}

std::vector<std::pair<double, double>> centroid_track(const VideoTensor& video) {
  std::vector<std::pair<double, double>> out;
  out.reserve(video.frames);
  for (size_t l = 0; l < video.frames; ++l) {
    double mass = 0.0, mr = 0.0, mc = 0.0;
    for (size_t y = 0; y < video.height; ++y)
      for (size_t x = 0; x < video.width; ++x)
        for (size_t ch = 0; ch < video.channels; ++ch) {
          const double p = video.at(l, y, x, ch);
          mass += p;
          mr += p * double(y);
          mc += p * double(x);
        }
    if (mass <= 0.0) throw ContractError("centroid_track: empty frame");
    out.emplace_back(mr / mass, mc / mass);
  }
  return out;
}

std::vector<Motion> classify_motions(const VideoTensor& video, const SceneConfig& config,
                                     size_t turn) {
  const auto observed = centroid_track(video);
  std::vector<std::pair<double, double>> deltas(observed.size());
  for (size_t l = 0; l < observed.size(); ++l)
    deltas[l] = {observed[l].first - observed[0].first,
                 observed[l].second - observed[0].second};

  const long max_r = long(config.height - kGlyphSize);
  const long max_c = long(config.width - kGlyphSize);
  std::vector<Motion> out;
  for (Motion m : all_motions()) {
    bool consistent = false;
    for (long r = 0; r <= max_r && !consistent; ++r) {
      for (long c = 0; c <= max_c && !consistent; ++c) {
        const auto path = trajectory(m, r, c, config, turn);
        bool ok = true;
        for (size_t l = 0; l < path.size() && ok; ++l) {
          const double dr = double(path[l].first - path[0].first) - deltas[l].first;
          const double dc = double(path[l].second - path[0].second) - deltas[l].second;
          ok = std::abs(dr) <= 1.0 && std::abs(dc) <= 1.0;
        }
        consistent = ok;
      }
    }
    if (consistent) out.push_back(m);
  }
  return out;
}

SceneSpec sample_scene(const DatasetBuildConfig& config, uint64_t id) {
  config.scene.validate();
  auto rng = make_stream(config.seed, 0x7363656e65000000ull + id);
  SceneSpec spec;
  spec.config = config.scene;
  const size_t n_digits =
      config.max_digits > 1 ? 1 + size_t(uniform_below(rng, 2)) : 1;
  std::vector<int> used;
  for (size_t k = 0; k < n_digits; ++k) {
    DigitSpec d;
    do {
      d.digit = int(uniform_below(rng, 10));
    } while (std::find(used.begin(), used.end(), d.digit) != used.end());
    used.push_back(d.digit);
    d.motion = all_motions()[uniform_below(rng, kMotionCount)];
    auto starts = canonical_starts(d.motion, config.scene, spec.turn());
    if (starts.empty()) starts = canonical_starts(Motion::UpDown, config.scene, spec.turn());
    const auto [r, c] = starts[uniform_below(rng, starts.size())];
    d.start_row = size_t(r);
    d.start_col = size_t(c);
    spec.digits.push_back(d);
  }
  return spec;
}

namespace {

bool hits_holdout(const SceneSpec& spec,
                  const std::vector<std::pair<int, Motion>>& holdout) {
  for (const auto& d : spec.digits)
    for (const auto& [digit, motion] : holdout)
      if (d.digit == digit && d.motion == motion) return true;
  return false;
}

std::string zero_padded(size_t v, int width) {
  std::string s = std::to_string(v);
  while (int(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

std::vector<DatasetItem> build_dataset(const std::string& out_dir,
                                       const DatasetBuildConfig& config,
                                       const vq::VqParams* vq) {
  if (config.count == 0) throw ConfigError("build_dataset: count must be >= 1");
  if (config.train_ratio < 0.0 || config.train_ratio > 1.0)
    throw ConfigError("build_dataset: train_ratio must be in [0,1]");
  fs::create_directories(fs::path(out_dir) / "videos");
  if (vq) fs::create_directories(fs::path(out_dir) / "tokens");

  std::vector<SceneSpec> specs;
  for (size_t id = 0; id < config.count; ++id) specs.push_back(sample_scene(config, id));

  // Every held-out combination must appear somewhere so the validation split
  // can witness it.
  for (const auto& [digit, motion] : config.holdout) {
    const bool present = std::any_of(specs.begin(), specs.end(), [&](const SceneSpec& s) {
      return hits_holdout(s, {{digit, motion}});
    });
    if (present) continue;
    SceneSpec extra;
    extra.config = config.scene;
    const auto starts = canonical_starts(motion, config.scene, extra.turn());
    const auto [r, c] = starts.empty() ? std::pair<long, long>{0, 0} : starts[starts.size() / 2];
    extra.digits.push_back({digit, motion, size_t(r), size_t(c)});
    specs.push_back(extra);
  }

  const size_t train_count = size_t(std::floor(double(config.count) * config.train_ratio));
  std::vector<DatasetItem> items;
  std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw IoError("build_dataset: cannot write manifest in " + out_dir);

  for (size_t id = 0; id < specs.size(); ++id) {
    const SceneSpec& spec = specs[id];
    DatasetItem item;
    item.id = id;
    item.spec = spec;
    item.caption = caption(spec);
    item.split = (id < train_count && !hits_holdout(spec, config.holdout)) ? "train" : "val";

    const VideoTensor video = render_scene(spec);
    item.video_path = "videos/scene_" + zero_padded(id, 4) + ".gdvv";
    save_video((fs::path(out_dir) / item.video_path).string(), video);
    if (vq) {
      item.tokens_path = "tokens/scene_" + zero_padded(id, 4) + ".gdtk";
      save_token_grid((fs::path(out_dir) / item.tokens_path).string(),
                      vq::encode_video(video, *vq));
    }

    nlohmann::json rec;
    rec["id"] = id;
    rec["split"] = item.split;
    rec["caption"] = item.caption;
    rec["video"] = item.video_path;
    if (vq) rec["tokens"] = item.tokens_path;
    rec["turn"] = spec.turn();
    rec["frames"] = spec.config.frames;
    rec["height"] = spec.config.height;
    rec["width"] = spec.config.width;
    rec["speed"] = spec.config.speed;
    nlohmann::json digits = nlohmann::json::array();
    for (const auto& d : spec.digits) {
      digits.push_back({{"digit", d.digit},
                        {"motion", motion_phrase(d.motion)},
                        {"start", {d.start_row, d.start_col}}});
    }
    rec["digits"] = digits;
    manifest << rec.dump() << "\n";
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace gridvid::data
