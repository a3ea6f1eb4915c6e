// Moving-digit scenes: trajectories against hand-worked paths and symmetry
// arguments, renderer pixel exactness, caption templates, the motion
// classifier, scene sampling, and dataset building with holdout handling.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "gridvid/dataset.hpp"
#include "gridvid/errors.hpp"
#include "gridvid/text.hpp"

using namespace gridvid;
namespace fs = std::filesystem;

namespace {

data::SceneConfig desk_scene() { return data::SceneConfig{};  /* 4 frames, 16x16, speed 2 */ }

std::vector<long> rows_of(const std::vector<std::pair<long, long>>& path) {
  std::vector<long> out;
  for (auto [r, c] : path) out.push_back(r);
  return out;
}

std::vector<long> cols_of(const std::vector<std::pair<long, long>>& path) {
  std::vector<long> out;
  for (auto [r, c] : path) out.push_back(c);
  return out;
}

data::SceneSpec single(int digit, data::Motion m, size_t r, size_t c,
                       data::SceneConfig cfg = desk_scene()) {
  data::SceneSpec spec;
  spec.config = cfg;
  spec.digits.push_back({digit, m, r, c});
  return spec;
}

bool vertical(data::Motion m) {
  return m == data::Motion::UpDown || m == data::Motion::UpThenDown ||
         m == data::Motion::DownThenUp;
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("motion phrases round-trip and stay distinct") {
  std::set<std::string> seen;
  for (data::Motion m : data::all_motions()) {
    const std::string phrase = data::motion_phrase(m);
    CHECK(data::motion_from_phrase(phrase) == m);
    CHECK(seen.insert(phrase).second);
  }
  CHECK(seen.size() == data::kMotionCount);
  CHECK_THROWS_AS(data::motion_from_phrase("sideways"), ConfigError);
}

TEST_CASE("hand-worked trajectories at speed 2 on a 16x16 canvas") {
  const auto cfg = desk_scene();
  const size_t turn = cfg.frames / 2;  // 2

  SUBCASE("up-and-down from row 4 bounces off the top edge") {
    const auto path = data::trajectory(data::Motion::UpDown, 4, 2, cfg, turn);
    CHECK(rows_of(path) == std::vector<long>{4, 2, 0, 2});
    CHECK(cols_of(path) == std::vector<long>{2, 2, 2, 2});
  }
  SUBCASE("up-and-down from the top edge reflects immediately") {
    const auto path = data::trajectory(data::Motion::UpDown, 0, 5, cfg, turn);
    CHECK(rows_of(path) == std::vector<long>{0, 2, 4, 6});
  }
  SUBCASE("down-then-up turns after the turn frame") {
    const auto path = data::trajectory(data::Motion::DownThenUp, 0, 3, cfg, turn);
    CHECK(rows_of(path) == std::vector<long>{0, 2, 4, 2});
    CHECK(cols_of(path) == std::vector<long>{3, 3, 3, 3});
  }
  SUBCASE("left-then-right mirrors down-then-up onto columns") {
    const auto path = data::trajectory(data::Motion::LeftThenRight, 5, 6, cfg, turn);
    CHECK(rows_of(path) == std::vector<long>{5, 5, 5, 5});
    CHECK(cols_of(path) == std::vector<long>{6, 4, 2, 4});
  }
  SUBCASE("left-and-right from the left edge reflects immediately") {
    const auto path = data::trajectory(data::Motion::LeftRight, 7, 0, cfg, turn);
    CHECK(cols_of(path) == std::vector<long>{0, 2, 4, 6});
  }
  SUBCASE("turn frame 0 means the second leg starts at frame 1") {
    const auto path = data::trajectory(data::Motion::DownThenUp, 6, 1, cfg, /*turn=*/0);
    CHECK(rows_of(path) == std::vector<long>{6, 4, 2, 0});
  }
}

TEST_CASE("trajectory rejects impossible geometry") {
  const auto cfg = desk_scene();
  // 16 - 8 = 8 is the last on-canvas top-left coordinate.
  CHECK_NOTHROW(data::trajectory(data::Motion::UpDown, 8, 8, cfg, 2));
  CHECK_THROWS_AS(data::trajectory(data::Motion::UpDown, 9, 0, cfg, 2), ConfigError);
  CHECK_THROWS_AS(data::trajectory(data::Motion::UpDown, 0, -1, cfg, 2), ConfigError);

  data::SceneConfig fast = cfg;
  fast.speed = 12;  // one step overshoots even after reflecting
  CHECK_THROWS_AS(data::trajectory(data::Motion::UpDown, 0, 0, fast, 2), ConfigError);
}

TEST_CASE("reversing a then-motion video equals the same motion from the far end") {
  // Play A-then-B backwards and you see the same shape traversed from its
  // endpoint with the turn moved to frames-1-turn. Holds whenever no edge is
  // touched, i.e. from canonical starts.
  const auto cfg = desk_scene();
  for (data::Motion m : {data::Motion::UpThenDown, data::Motion::DownThenUp,
                         data::Motion::LeftThenRight, data::Motion::RightThenLeft}) {
    for (size_t turn = 1; turn < cfg.frames; ++turn) {
      for (auto [r, c] : data::canonical_starts(m, cfg, turn)) {
        const auto fwd = data::trajectory(m, r, c, cfg, turn);
        const auto back = data::trajectory(m, fwd.back().first, fwd.back().second, cfg,
                                           cfg.frames - 1 - turn);
        auto rev = fwd;
        std::reverse(rev.begin(), rev.end());
        REQUIRE(back == rev);
      }
    }
  }
}

TEST_CASE("swapping the two legs reflects the path through its start") {
  const auto cfg = desk_scene();
  const size_t turn = cfg.frames / 2;
  const std::pair<data::Motion, data::Motion> partners[] = {
      {data::Motion::UpThenDown, data::Motion::DownThenUp},
      {data::Motion::LeftThenRight, data::Motion::RightThenLeft},
  };
  for (auto [a, b] : partners) {
    for (auto [r, c] : data::canonical_starts(a, cfg, turn)) {
      const auto pa = data::trajectory(a, r, c, cfg, turn);
      // Same start may reflect for the partner; only compare canonical pairs.
      const auto starts_b = data::canonical_starts(b, cfg, turn);
      if (std::find(starts_b.begin(), starts_b.end(), std::pair<long, long>{r, c}) ==
          starts_b.end())
        continue;
      const auto pb = data::trajectory(b, r, c, cfg, turn);
      for (size_t t = 0; t < pa.size(); ++t) {
        CHECK(pb[t].first - long(r) == -(pa[t].first - long(r)));
        CHECK(pb[t].second - long(c) == -(pa[t].second - long(c)));
      }
    }
  }
}

TEST_CASE("canonical starts: then-motions exclude reflecting starts, plain keep all") {
  const auto cfg = desk_scene();
  const size_t turn = cfg.frames / 2;

  const auto plain = data::canonical_starts(data::Motion::UpDown, cfg, turn);
  CHECK(plain.size() == 81);  // every top-left position on a 16x16 canvas

  // down-then-up covers rows start..start+4 and back; rows 0..4 survive.
  const auto dtu = data::canonical_starts(data::Motion::DownThenUp, cfg, turn);
  CHECK(dtu.size() == 45);
  for (auto [r, c] : dtu) CHECK(r <= 4);

  // up-then-down needs headroom above: rows 4..8.
  const auto utd = data::canonical_starts(data::Motion::UpThenDown, cfg, turn);
  CHECK(utd.size() == 45);
  for (auto [r, c] : utd) CHECK(r >= 4);
}

TEST_CASE("renderer stamps the exact glyph along the trajectory") {
  const auto cfg = desk_scene();
  const auto spec = single(3, data::Motion::DownThenUp, 1, 2);
  const VideoTensor video = data::render_scene(spec);
  REQUIRE(video.frames == cfg.frames);
  REQUIRE(video.height == cfg.height);
  REQUIRE(video.width == cfg.width);
  REQUIRE(video.channels == 1);

  const data::Glyph glyph = data::glyph_from_digit(3);
  const auto path = data::trajectory(spec.digits[0].motion, 1, 2, cfg, spec.turn());
  for (size_t l = 0; l < video.frames; ++l) {
    const auto [r, c] = path[l];
    for (size_t y = 0; y < video.height; ++y)
      for (size_t x = 0; x < video.width; ++x) {
        const bool inside = long(y) >= r && long(y) < r + long(glyph.height) &&
                            long(x) >= c && long(x) < c + long(glyph.width);
        const double want = inside ? glyph.at(size_t(long(y) - r), size_t(long(x) - c)) : 0.0;
        REQUIRE(video.at(l, y, x, 0) == want);
      }
  }
}

TEST_CASE("two overlapping digits compose by per-pixel max") {
  data::SceneSpec spec = single(1, data::Motion::UpThenDown, 4, 4);
  spec.digits.push_back({8, data::Motion::DownThenUp, 4, 4});
  const VideoTensor both = data::render_scene(spec);

  const VideoTensor a = data::render_scene(single(1, data::Motion::UpThenDown, 4, 4));
  const VideoTensor b = data::render_scene(single(8, data::Motion::DownThenUp, 4, 4));
  for (size_t i = 0; i < both.pixels.size(); ++i)
    REQUIRE(both.pixels[i] == std::max(a.pixels[i], b.pixels[i]));
}

TEST_CASE("scene validation rejects bad specs") {
  CHECK_THROWS_AS(data::render_scene(data::SceneSpec{}), ConfigError);  // no digits
  CHECK_THROWS_AS(data::render_scene(single(10, data::Motion::UpDown, 0, 0)), ConfigError);
  CHECK_THROWS_AS(data::render_scene(single(3, data::Motion::UpDown, 12, 0)), ConfigError);
  data::SceneSpec late = single(3, data::Motion::UpDown, 0, 0);
  late.turn_frame = 4;  // beyond last frame index
  CHECK_THROWS_AS(late.validate(), ConfigError);
  data::SceneConfig small;
  small.height = 4;  // smaller than the glyph
  CHECK_THROWS_AS(small.validate(), ConfigError);
}

TEST_CASE("caption templates") {
  CHECK(data::caption(single(9, data::Motion::DownThenUp, 0, 0)) ==
        "digit 9 is moving down then up");

  data::SceneSpec pair = single(7, data::Motion::RightThenLeft, 0, 0);
  pair.digits.push_back({3, data::Motion::DownThenUp, 0, 8});
  CHECK(data::caption(pair) ==
        "digit 7 moves right then left while digit 3 moves down then up");
}

TEST_CASE("captions separate every single-digit (digit, motion) pair") {
  std::set<std::string> seen;
  for (int d = 0; d <= 9; ++d)
    for (data::Motion m : data::all_motions())
      CHECK(seen.insert(data::caption(single(d, m, 0, 0))).second);
  CHECK(seen.size() == 60);
}

TEST_CASE("caption vocabulary tokenizes every template within 16 positions") {
  const Vocabulary& vocab = Vocabulary::captions();
  std::vector<std::string> captions;
  for (int d = 0; d <= 9; ++d)
    for (data::Motion m : data::all_motions())
      captions.push_back(data::caption(single(d, m, 0, 0)));
  data::SceneSpec pair = single(7, data::Motion::LeftRight, 0, 0);
  pair.digits.push_back({0, data::Motion::UpDown, 8, 8});
  captions.push_back(data::caption(pair));

  for (const auto& text : captions) {
    const TextSequence seq = vocab.tokenize(text, 16);
    seq.validate();
    CHECK(seq.padded_length() == 16);
    CHECK(seq.length() <= 16);
    CHECK(vocab.detokenize(seq) == text);
  }
  CHECK_THROWS_AS(vocab.tokenize("digit 3 is moving diagonally", 16), TokenizerError);
}

TEST_CASE("centroid track follows the glyph and rejects empty frames") {
  const auto cfg = desk_scene();
  const VideoTensor video = data::render_scene(single(7, data::Motion::UpDown, 4, 2));
  const auto track = data::centroid_track(video);
  REQUIRE(track.size() == cfg.frames);
  // Row 4,2,0,2: successive centroid rows move by exactly the speed.
  for (size_t l = 1; l < track.size(); ++l) {
    const double dr = track[l].first - track[l - 1].first;
    const double dc = track[l].second - track[l - 1].second;
    CHECK(std::abs(std::abs(dr) - 2.0) < 1e-9);
    CHECK(std::abs(dc) < 1e-9);
  }

  CHECK_THROWS_AS(data::centroid_track(VideoTensor(1, 4, 4, 1)), ContractError);
}

TEST_CASE("motion classifier returns every consistent motion") {
  const auto cfg = desk_scene();
  const size_t turn = cfg.frames / 2;

  SUBCASE("down-then-up from a canonical start is unambiguous") {
    const VideoTensor v = data::render_scene(single(5, data::Motion::DownThenUp, 4, 3));
    const auto motions = data::classify_motions(v, cfg, turn);
    REQUIRE(motions == std::vector<data::Motion>{data::Motion::DownThenUp});
  }
  SUBCASE("a bounce at the top edge looks like up-then-down too") {
    // Rows 4,2,0,2 are produced both by bouncing and by turning.
    const VideoTensor v = data::render_scene(single(5, data::Motion::UpDown, 4, 3));
    const auto motions = data::classify_motions(v, cfg, turn);
    CHECK(std::count(motions.begin(), motions.end(), data::Motion::UpDown) == 1);
    CHECK(std::count(motions.begin(), motions.end(), data::Motion::UpThenDown) == 1);
  }
  SUBCASE("true motion is always in the set, axes never mix") {
    for (data::Motion m : data::all_motions()) {
      const auto starts = data::canonical_starts(m, cfg, turn);
      for (size_t i = 0; i < starts.size(); i += 7) {
        const auto [r, c] = starts[i];
        const VideoTensor v = data::render_scene(single(2, m, size_t(r), size_t(c)));
        const auto motions = data::classify_motions(v, cfg, turn);
        REQUIRE(std::count(motions.begin(), motions.end(), m) == 1);
        for (data::Motion got : motions) REQUIRE(vertical(got) == vertical(m));
      }
    }
  }
}

TEST_CASE("scene sampling is reproducible per id and wholly in-spec") {
  data::DatasetBuildConfig cfg;
  cfg.seed = 17;
  for (uint64_t id = 0; id < 40; ++id) {
    const data::SceneSpec a = data::sample_scene(cfg, id);
    const data::SceneSpec b = data::sample_scene(cfg, id);
    REQUIRE(a.digits.size() == b.digits.size());
    REQUIRE(a.digits.size() >= 1);
    REQUIRE(a.digits.size() <= cfg.max_digits);
    for (size_t k = 0; k < a.digits.size(); ++k) {
      CHECK(a.digits[k].digit == b.digits[k].digit);
      CHECK(a.digits[k].motion == b.digits[k].motion);
      CHECK(a.digits[k].start_row == b.digits[k].start_row);
      CHECK(a.digits[k].start_col == b.digits[k].start_col);
    }
    if (a.digits.size() == 2) CHECK(a.digits[0].digit != a.digits[1].digit);
    CHECK_NOTHROW(data::render_scene(a));  // starts are always on canvas
  }
  // Different seeds change the draw somewhere in a small window.
  data::DatasetBuildConfig other = cfg;
  other.seed = 18;
  bool any_differ = false;
  for (uint64_t id = 0; id < 10 && !any_differ; ++id) {
    const auto a = data::sample_scene(cfg, id);
    const auto b = data::sample_scene(other, id);
    any_differ = a.digits.size() != b.digits.size() ||
                 a.digits[0].digit != b.digits[0].digit ||
                 a.digits[0].start_row != b.digits[0].start_row ||
                 a.digits[0].start_col != b.digits[0].start_col;
  }
  CHECK(any_differ);
}

TEST_CASE("dataset build: splits, holdout, witnesses, manifest") {
  data::DatasetBuildConfig cfg;
  cfg.count = 30;
  cfg.train_ratio = 0.8;
  cfg.seed = 5;

  SUBCASE("without holdout the split is a pure id threshold") {
    const auto dir = fresh_dir("gridvid_ds_plain");
    const auto items = data::build_dataset(dir.string(), cfg);
    REQUIRE(items.size() == cfg.count);
    size_t train = 0;
    for (const auto& it : items) {
      if (it.split == "train") ++train;
      CHECK(it.split == (it.id < 24 ? "train" : "val"));
      CHECK(fs::exists(dir / it.video_path));
      CHECK(it.tokens_path.empty());
      CHECK(it.caption == data::caption(it.spec));
    }
    CHECK(train == 24);

    std::ifstream manifest(dir / "manifest.jsonl");
    REQUIRE(manifest.good());
    size_t lines = 0;
    std::string line;
    while (std::getline(manifest, line))
      if (!line.empty()) ++lines;
    CHECK(lines == items.size());
  }

  SUBCASE("held-out combinations never train and always have a witness") {
    cfg.holdout = {{9, data::Motion::DownThenUp}};
    const auto dir = fresh_dir("gridvid_ds_holdout");
    const auto items = data::build_dataset(dir.string(), cfg);
    REQUIRE(items.size() >= cfg.count);

    size_t witnesses = 0;
    for (const auto& it : items) {
      bool hits = false;
      for (const auto& d : it.spec.digits)
        hits |= d.digit == 9 && d.motion == data::Motion::DownThenUp;
      if (hits) {
        ++witnesses;
        CHECK(it.split == "val");
      }
    }
    CHECK(witnesses >= 1);
    // Appended witnesses (if any) sit past the sampled range.
    for (size_t i = cfg.count; i < items.size(); ++i) CHECK(items[i].split == "val");
  }

  SUBCASE("two builds of the same config agree item by item") {
    const auto dir1 = fresh_dir("gridvid_ds_rep1");
    const auto dir2 = fresh_dir("gridvid_ds_rep2");
    const auto a = data::build_dataset(dir1.string(), cfg);
    const auto b = data::build_dataset(dir2.string(), cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].split == b[i].split);
      CHECK(a[i].caption == b[i].caption);
      CHECK(a[i].video_path == b[i].video_path);
    }
  }

  SUBCASE("bad configs are rejected") {
    data::DatasetBuildConfig bad = cfg;
    bad.count = 0;
    CHECK_THROWS_AS(data::build_dataset(fresh_dir("gridvid_ds_bad").string(), bad),
                    ConfigError);
    bad = cfg;
    bad.train_ratio = 1.5;
    CHECK_THROWS_AS(data::build_dataset(fresh_dir("gridvid_ds_bad").string(), bad),
                    ConfigError);
  }
}

TEST_CASE("builtin glyphs are 8x8, binary, and pairwise distinct") {
  std::vector<data::Glyph> glyphs;
  for (int d = 0; d <= 9; ++d) {
    const data::Glyph g = data::glyph_from_digit(d);
    REQUIRE(g.height == data::kGlyphSize);
    REQUIRE(g.width == data::kGlyphSize);
    REQUIRE(g.pixels.size() == 64);
    double lit = 0.0;
    for (double p : g.pixels) {
      CHECK((p == 0.0 || p == 1.0));
      lit += p;
    }
    CHECK(lit > 0.0);
    glyphs.push_back(g);
  }
  for (size_t a = 0; a < glyphs.size(); ++a)
    for (size_t b = a + 1; b < glyphs.size(); ++b)
      CHECK(glyphs[a].pixels != glyphs[b].pixels);
  CHECK_THROWS_AS(data::glyph_from_digit(10), ConfigError);
  CHECK_THROWS_AS(data::glyph_from_digit(-1), ConfigError);
}

TEST_CASE("external glyphs load from binary PGM") {
  const fs::path path = fs::temp_directory_path() / "gridvid_glyph.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n# comment line\n3 2\n255\n";
    const unsigned char bytes[] = {0, 51, 102, 153, 204, 255};
    out.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  const data::Glyph g = data::load_glyph_pgm(path.string());
  REQUIRE(g.width == 3);
  REQUIRE(g.height == 2);
  CHECK(g.at(0, 0) == doctest::Approx(0.0));
  CHECK(g.at(0, 1) == doctest::Approx(51.0 / 255.0));
  CHECK(g.at(1, 2) == doctest::Approx(1.0));

  const fs::path bad = fs::temp_directory_path() / "gridvid_glyph_bad.pgm";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "P2\n3 2\n255\n0 0 0 0 0 0\n";  // ASCII variant is not supported
  }
  CHECK_THROWS_AS(data::load_glyph_pgm(bad.string()), IoError);
  CHECK_THROWS_AS(data::load_glyph_pgm("/nonexistent/glyph.pgm"), IoError);
}
