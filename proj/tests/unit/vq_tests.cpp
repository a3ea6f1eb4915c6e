// Frame quantizer-autoencoder: nearest-neighbor assignment against an
// exhaustive scan, loss breakdown against hand computation, straight-through
// gradient behavior, shape plumbing, and a micro overfit run.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "gridvid/grad_check.hpp"
#include "gridvid/ops.hpp"
#include "gridvid/rng.hpp"
#include "gridvid/vq_codec.hpp"

using namespace gridvid;
using ad::Tensor;

namespace {

std::vector<double> random_values(size_t n, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform_range(rng, lo, hi);
  return v;
}

// Exhaustive scan with explicit squared distances; ties resolved by taking
// the first minimum encountered from index 0 upward.
int nearest_ref(std::span<const double> row, std::span<const double> codebook, size_t K,
                size_t d) {
  int best = 0;
  double best_d = 1e300;
  for (size_t k = 0; k < K; ++k) {
    double dist = 0.0;
    for (size_t c = 0; c < d; ++c) {
      const double diff = row[c] - codebook[k * d + c];
      dist += diff * diff;
    }
    if (dist < best_d) {
      best_d = dist;
      best = int(k);
    }
  }
  return best;
}

VideoTensor random_video(const vq::VqConfig& c, std::mt19937_64& rng) {
  VideoTensor v(c.frames, c.height, c.width, c.channels);
  for (auto& p : v.pixels) p = uniform01(rng);
  return v;
}

vq::VqConfig tiny_config() {
  vq::VqConfig c;
  c.frames = 2;
  c.height = 8;
  c.width = 8;
  c.channels = 1;
  c.hidden = 6;
  c.embed_dim = 5;
  c.codebook_size = 7;
  return c;
}

}  // namespace

TEST_CASE("quantize matches the exhaustive scan on random instances") {
  auto rng = make_stream(301, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t K = 1 + uniform_below(rng, 64), d = 1 + uniform_below(rng, 8);
    const size_t rows = 1 + uniform_below(rng, 6);
    auto codebook = Tensor::from_data({K, d}, random_values(K * d, rng));
    auto latent = random_values(rows * d, rng);
    const auto got = vq::quantize(latent, rows, codebook);
    REQUIRE(got.size() == rows);
    for (size_t r = 0; r < rows; ++r) {
      const int expect = nearest_ref(std::span(latent).subspan(r * d, d), codebook.value(), K, d);
      CHECK(got[r] == expect);
    }
  }
}

TEST_CASE("quantize tie-breaking picks the lowest index") {
  // Two identical codebook rows; the duplicate at the higher index never wins.
  auto codebook = Tensor::from_data({3, 2}, {5.0, 5.0, 1.0, 1.0, 1.0, 1.0});
  std::vector<double> latent{1.0, 1.0};
  CHECK(vq::quantize(latent, 1, codebook) == std::vector<int>{1});

  // Equidistant rows: x=0 sits exactly between -1 and +1.
  auto cb2 = Tensor::from_data({2, 1}, {1.0, -1.0});
  std::vector<double> mid{0.0};
  CHECK(vq::quantize(mid, 1, cb2) == std::vector<int>{0});
}

TEST_CASE("lookup gathers codebook rows and backpropagates into them") {
  auto codebook = Tensor::from_data({3, 2}, {0, 1, 2, 3, 4, 5}, true);
  auto rows = vq::lookup({2, 0, 2}, codebook);
  REQUIRE(rows.shape() == ad::Shape{3, 2});
  CHECK(rows.value()[0] == 4.0);  // first element of row 2
  CHECK(rows.value()[3] == 1.0);  // second element of row 0
  ad::backward(ad::sum(rows));
  CHECK(codebook.grad()[0] == 1.0);  // row 0 used once
  CHECK(codebook.grad()[4] == 2.0);  // row 2 used twice
  CHECK(codebook.grad()[2] == 0.0);  // row 1 unused
}

TEST_CASE("encoder/decoder shapes follow the two stride-2 stages") {
  const auto c = tiny_config();
  auto params = vq::VqParams::init(c, 5);
  auto rng = make_stream(302, 0);
  const auto video = random_video(c, rng);
  auto frame = Tensor::from_data({c.height, c.width, c.channels},
                                 {video.frame(0), video.frame(0) + video.frame_size()});
  auto latent = vq::encode_frame(frame, params);
  REQUIRE(latent.shape() == ad::Shape{c.latent_rows(), c.latent_cols(), c.embed_dim});
  auto flat = ad::reshape(latent, {c.latent_rows() * c.latent_cols(), c.embed_dim});
  auto ids = vq::quantize(flat.value(), c.latent_rows() * c.latent_cols(), params.codebook);
  auto recon = vq::decode_frame(
      ad::reshape(vq::lookup(ids, params.codebook),
                  {c.latent_rows(), c.latent_cols(), c.embed_dim}),
      params);
  REQUIRE(recon.shape() == ad::Shape{c.height, c.width, c.channels});
  for (double p : recon.value()) {
    CHECK(p > 0.0);  // sigmoid range
    CHECK(p < 1.0);
  }
}

TEST_CASE("encode_video / decode_tokens round the full grid") {
  const auto c = tiny_config();
  auto params = vq::VqParams::init(c, 6);
  auto rng = make_stream(303, 0);
  const auto video = random_video(c, rng);
  const auto grid = vq::encode_video(video, params);
  CHECK(grid.frames == c.frames);
  CHECK(grid.rows == c.latent_rows());
  CHECK(grid.cols == c.latent_cols());
  CHECK(grid.vocab == c.codebook_size);
  grid.validate();
  const auto recon = vq::decode_tokens(grid, params);
  CHECK(recon.frames == c.frames);
  CHECK(recon.height == c.height);
  CHECK(recon.width == c.width);
  // Same tokens, same decode.
  const auto recon2 = vq::decode_tokens(grid, params);
  CHECK(recon.pixels == recon2.pixels);
}

TEST_CASE("loss breakdown recombines and matches direct computation") {
  const auto c = tiny_config();
  auto params = vq::VqParams::init(c, 7);
  auto rng = make_stream(304, 0);
  const auto video = random_video(c, rng);
  const auto loss = vq::vqvae_loss(video, params);
  const auto& b = loss.breakdown;
  CHECK(b.beta == c.beta);
  CHECK(b.total == doctest::Approx(b.reconstruction + b.codebook + b.beta * b.commitment)
                       .epsilon(1e-12));
  CHECK(loss.total.item() == doctest::Approx(b.total).epsilon(1e-12));
  // Codebook and commitment terms measure the same distance, scaled.
  CHECK(b.codebook == doctest::Approx(b.commitment).epsilon(1e-12));
  CHECK(b.reconstruction > 0.0);
}

TEST_CASE("straight-through estimator: encoder receives reconstruction gradient") {
  const auto c = tiny_config();
  auto params = vq::VqParams::init(c, 8);
  auto rng = make_stream(305, 0);
  const auto video = random_video(c, rng);
  auto loss = vq::vqvae_loss(video, params);
  ad::backward(loss.total);
  // Without the straight-through path the encoder would only see the
  // commitment term; with it, both encoder stages and the codebook get
  // nonzero gradient.
  auto nonzero = [](const Tensor& t) {
    for (double g : t.grad())
      if (g != 0.0) return true;
    return false;
  };
  CHECK(nonzero(params.enc1_kernel));
  CHECK(nonzero(params.enc2_kernel));
  CHECK(nonzero(params.codebook));
  CHECK(nonzero(params.dec1_kernel));
  CHECK(nonzero(params.dec2_kernel));
}

TEST_CASE("finite differences validate the full loss at a micro config") {
  vq::VqConfig c;
  c.frames = 1;
  c.height = 4;
  c.width = 4;
  c.channels = 1;
  c.hidden = 2;
  c.embed_dim = 2;
  c.codebook_size = 3;
  auto params = vq::VqParams::init(c, 9);
  auto rng = make_stream(306, 0);
  const auto video = random_video(c, rng);
  // Quantization makes the loss piecewise; a tiny epsilon keeps every probe
  // on the same piece (assignment flips would show up as a large error).
  const double err = ad::grad_check(
      [&] { return vq::vqvae_loss(video, params).total; }, params.trainable(), 1e-6);
  CHECK(err < 1e-3);
}

TEST_CASE("parameter checkpoint round trip preserves every tensor") {
  const auto c = tiny_config();
  auto params = vq::VqParams::init(c, 10);
  const auto dir = std::filesystem::temp_directory_path() / "gridvid_vq_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "params.gdva").string();
  params.save(path);
  const auto loaded = vq::VqParams::load(path, c);
  const auto a = params.named();
  const auto b = loaded.named();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    REQUIRE(a[i].second.shape() == b[i].second.shape());
    for (size_t j = 0; j < a[i].second.size(); ++j)
      CHECK(a[i].second.value()[j] == b[i].second.value()[j]);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("training reduces reconstruction error on one video") {
  vq::VqConfig c;
  c.frames = 2;
  c.height = 8;
  c.width = 8;
  c.hidden = 8;
  c.embed_dim = 4;
  c.codebook_size = 16;
  auto rng = make_stream(307, 0);
  // A structured target (bright square on dark background) rather than noise.
  VideoTensor video(c.frames, c.height, c.width, 1);
  for (size_t l = 0; l < c.frames; ++l)
    for (size_t y = 2; y < 6; ++y)
      for (size_t x = 2 + l; x < 6 + l; ++x) video.at(l, y, x, 0) = 1.0;

  const double before = vq::reconstruction_mse(video, vq::VqParams::init(c, 11));
  vq::VqTrainConfig tc;
  tc.steps = 700;
  tc.seed = 11;
  tc.log_every = 0;
  const auto params = vq::train_vqvae({video}, c, tc);
  const double after = vq::reconstruction_mse(video, params);
  CHECK(after < before * 0.2);
  CHECK(after < 0.02);
}

TEST_CASE("config validation rejects impossible geometry") {
  vq::VqConfig c = tiny_config();
  c.height = 10;  // not divisible by 4
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.codebook_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
