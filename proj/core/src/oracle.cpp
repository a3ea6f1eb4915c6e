#include "gridvid/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <tuple>

#include "httplib.h"
#include "json.hpp"

#include "gridvid/errors.hpp"
#include "gridvid/glyphs.hpp"

namespace gridvid {

namespace {

// Normalizes [0,split) and [split,end) separately, each to length 1/sqrt(2),
// so the whole vector is unit length and the two feature groups contribute
// comparably regardless of their raw magnitudes. An all-zero group leaves the
// other carrying the full unit length.
void split_normalize(std::vector<double>& v, size_t split, const char* what) {
  double a = 0.0, b = 0.0;
  for (size_t i = 0; i < split; ++i) a += v[i] * v[i];
  for (size_t i = split; i < v.size(); ++i) b += v[i] * v[i];
  if (!(a > 1e-24) && !(b > 1e-24))
    throw OracleError(std::string(what) + ": zero embedding");
  const double target = (a > 1e-24 && b > 1e-24) ? 1.0 / std::sqrt(2.0) : 1.0;
  if (a > 1e-24) {
    const double s = target / std::sqrt(a);
    for (size_t i = 0; i < split; ++i) v[i] *= s;
  }
  if (b > 1e-24) {
    const double s = target / std::sqrt(b);
    for (size_t i = split; i < v.size(); ++i) v[i] *= s;
  }
}

size_t cell_of(long v, size_t extent) {
  v = std::clamp(v, 0L, long(extent) - 1);
  return std::min<size_t>(2, size_t(v) * 3 / extent);
}

// Shift that moves an anchor point to the canvas center; histograms are taken
// in these recentred coordinates so they describe motion shape, not where on
// the canvas the digit happens to sit.
std::pair<long, long> recenter_shift(double anchor_r, double anchor_c, size_t height,
                                     size_t width) {
  return {std::lround((double(height) - 1.0) / 2.0 - anchor_r),
          std::lround((double(width) - 1.0) / 2.0 - anchor_c)};
}

}  // namespace

ToyOracle::ToyOracle(const data::SceneConfig& scene, size_t turn_frame)
    : scene_(scene), turn_(turn_frame) {
  scene_.validate();
  // Signature of a motion: drop a uniform glyph-sized mass block on every
  // canonical trajectory, recentre the whole trajectory so its first-frame
  // block centroid sits at the canvas center, histogram each frame into its
  // own block, and average over starts. Recentring removes the start position
  // from the features; separate frame blocks preserve temporal order, so a
  // motion and its reverse (same cells, opposite order) stay distinct.
  const double half_glyph = (double(data::kGlyphSize) - 1.0) / 2.0;
  signatures_.resize(data::kMotionCount);
  for (data::Motion m : data::all_motions()) {
    std::vector<double> sig(kCells * scene_.frames, 0.0);
    size_t starts = 0;
    for (const auto& [r, c] : data::canonical_starts(m, scene_, turn_)) {
      const auto path = data::trajectory(m, r, c, scene_, turn_);
      const auto [dy, dx] = recenter_shift(double(path[0].first) + half_glyph,
                                           double(path[0].second) + half_glyph,
                                           scene_.height, scene_.width);
      for (size_t t = 0; t < path.size(); ++t) {
        const auto [pr, pc] = path[t];
        for (size_t y = 0; y < data::kGlyphSize; ++y)
          for (size_t x = 0; x < data::kGlyphSize; ++x) {
            const size_t cell = cell_of(pr + long(y) + dy, scene_.height) * 3 +
                                cell_of(pc + long(x) + dx, scene_.width);
            sig[t * kCells + cell] += 1.0 / double(data::kGlyphSize * data::kGlyphSize);
          }
      }
      ++starts;
    }
    if (starts == 0) throw ConfigError("toy oracle: motion has no canonical starts");
    for (double& v : sig) v /= double(starts);
    signatures_[size_t(m)] = std::move(sig);
  }
}

ToyOracle::ToyOracle(const data::SceneConfig& scene) : ToyOracle(scene, scene.frames / 2) {}

const std::vector<double>& ToyOracle::motion_signature(data::Motion m) const {
  return signatures_[size_t(m)];
}

std::vector<double> ToyOracle::cell_histogram(const VideoTensor& video, size_t frame) const {
  // Anchor every frame of the clip on the first frame's mass centroid, the
  // same recentring the signatures use: a trajectory's shape embeds the same
  // way wherever it starts.
  long dy = 0, dx = 0;
  {
    double mass = 0.0, mr = 0.0, mc = 0.0;
    for (size_t y = 0; y < video.height; ++y)
      for (size_t x = 0; x < video.width; ++x)
        for (size_t ch = 0; ch < video.channels; ++ch) {
          const double p = video.at(0, y, x, ch);
          mass += p;
          mr += p * double(y);
          mc += p * double(x);
        }
    if (mass > 0.0)
      std::tie(dy, dx) = recenter_shift(mr / mass, mc / mass, video.height, video.width);
  }

  std::vector<double> hist(kCells, 0.0);
  double mass = 0.0;
  for (size_t y = 0; y < video.height; ++y)
    for (size_t x = 0; x < video.width; ++x)
      for (size_t ch = 0; ch < video.channels; ++ch) {
        const double p = video.at(frame, y, x, ch);
        hist[cell_of(long(y) + dy, video.height) * 3 + cell_of(long(x) + dx, video.width)] += p;
        mass += p;
      }
  if (mass > 0.0)
    for (double& v : hist) v /= mass;
  return hist;
}

std::vector<double> ToyOracle::embed_frame(const VideoTensor& video, size_t frame) const {
  if (frame >= video.frames) throw OracleError("toy oracle: frame index out of range");
  if (frame >= scene_.frames)
    throw OracleError("toy oracle: video has more frames than the configured scene");
  std::vector<double> out(dim(), 0.0);

  // Digit slots: best normalized correlation of each glyph over all placements.
  for (int d = 0; d <= 9; ++d) {
    const data::Glyph g = data::glyph_from_digit(d);
    double g_sq = 0.0;
    for (double p : g.pixels) g_sq += p * p;
    double best = 0.0;
    for (size_t y = 0; y + g.height <= video.height; ++y)
      for (size_t x = 0; x + g.width <= video.width; ++x) {
        double dot = 0.0, f_sq = 0.0;
        for (size_t u = 0; u < g.height; ++u)
          for (size_t v = 0; v < g.width; ++v) {
            const double f = video.at(frame, y + u, x + v, 0);
            dot += g.at(u, v) * f;
            f_sq += f * f;
          }
        if (f_sq > 0.0) best = std::max(best, dot / std::sqrt(g_sq * f_sq));
      }
    out[size_t(d)] = best;
  }

  // Position features live only in this frame's block; the other blocks stay
  // zero so the dot with a caption embedding reads out the matching frame of
  // the motion signature.
  const auto hist = cell_histogram(video, frame);
  std::copy(hist.begin(), hist.end(), out.begin() + 10 + frame * kCells);
  split_normalize(out, 10, "toy oracle frame");
  return out;
}

std::vector<double> ToyOracle::embed_text(const std::string& text) const {
  std::vector<std::string> words;
  {
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
      for (char& ch : w) ch = char(std::tolower(static_cast<unsigned char>(ch)));
      words.push_back(w);
    }
  }

  std::vector<double> out(dim(), 0.0);
  size_t i = 0;
  const auto fail = [&text](const std::string& why) {
    throw OracleError("toy oracle cannot parse caption '" + text + "': " + why);
  };
  while (i < words.size()) {
    if (words[i] != "digit" || i + 1 >= words.size()) fail("expected 'digit <n>'");
    int d = -1;
    try {
      d = std::stoi(words[i + 1]);
    } catch (const std::exception&) {
      fail("bad digit token '" + words[i + 1] + "'");
    }
    if (d < 0 || d > 9) fail("digit out of range");
    i += 2;
    if (i + 1 < words.size() && words[i] == "is" && words[i + 1] == "moving")
      i += 2;
    else if (i < words.size() && words[i] == "moves")
      i += 1;
    else
      fail("expected 'is moving' or 'moves'");
    std::string phrase;
    while (i < words.size() && words[i] != "while") {
      if (!phrase.empty()) phrase += ' ';
      phrase += words[i++];
    }
    data::Motion motion = data::Motion::UpDown;
    try {
      motion = data::motion_from_phrase(phrase);
    } catch (const ConfigError&) {
      fail("unknown motion phrase '" + phrase + "'");
    }
    out[size_t(d)] += 1.0;
    const auto& sig = motion_signature(motion);
    for (size_t j = 0; j < sig.size(); ++j) out[10 + j] += sig[j];
    if (i < words.size()) ++i;  // skip "while"
  }
  split_normalize(out, 10, "toy oracle text");
  return out;
}

struct HttpOracle::Impl {
  httplib::Client client;
  explicit Impl(const HttpOracleConfig& config) : client(config.base_url) {
    const auto sec = time_t(config.timeout_s);
    const auto usec = time_t((config.timeout_s - double(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
  }
};

HttpOracle::HttpOracle(HttpOracleConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("http oracle: base_url is required");
  if (config_.dim == 0) throw ConfigError("http oracle: embedding dim is required");
  impl_ = std::make_unique<Impl>(config_);
}

HttpOracle::~HttpOracle() = default;

std::vector<double> HttpOracle::post(const std::string& body) const {
  httplib::Result res;
  for (size_t attempt = 0; attempt <= config_.retries; ++attempt) {
    res = impl_->client.Post("/embed", body, "application/json");
    if (res) break;  // connected; retries cover transport failures only
  }
  if (!res)
    throw OracleError("http oracle: cannot reach " + config_.base_url + " after " +
                      std::to_string(config_.retries + 1) + " attempts");
  if (res->status != 200)
    throw OracleError("http oracle: HTTP " + std::to_string(res->status) + " from " +
                      config_.base_url + "/embed");

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(std::string("http oracle: malformed response JSON: ") + e.what());
  }
  if (!parsed.contains("embedding") || !parsed["embedding"].is_array())
    throw OracleError("http oracle: response lacks an 'embedding' array");
  std::vector<double> v;
  v.reserve(config_.dim);
  for (const auto& x : parsed["embedding"]) {
    if (!x.is_number()) throw OracleError("http oracle: non-numeric embedding entry");
    v.push_back(x.get<double>());
  }
  if (v.size() != config_.dim)
    throw OracleError("http oracle: embedding width " + std::to_string(v.size()) +
                      " != configured " + std::to_string(config_.dim));
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw OracleError("http oracle: non-finite embedding entry");
    sq += x * x;
  }
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
    throw OracleError("http oracle: embedding is not unit length");
  return v;
}

std::vector<double> HttpOracle::embed_text(const std::string& text) const {
  nlohmann::json req{{"kind", "text"}, {"text", text}};
  return post(req.dump());
}

std::vector<double> HttpOracle::embed_frame(const VideoTensor& video, size_t frame) const {
  if (frame >= video.frames) throw OracleError("http oracle: frame index out of range");
  nlohmann::json req{{"kind", "frame"},
                     {"height", video.height},
                     {"width", video.width},
                     {"channels", video.channels}};
  auto pixels = nlohmann::json::array();
  const double* p = video.frame(frame);
  for (size_t i = 0; i < video.frame_size(); ++i) pixels.push_back(p[i]);
  req["pixels"] = std::move(pixels);
  return post(req.dump());
}

}  // namespace gridvid
