#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridvid/dataset.hpp"
#include "gridvid/decoder.hpp"
#include "gridvid/oracle.hpp"
#include "gridvid/sampler.hpp"
#include "gridvid/vq_codec.hpp"

namespace gridvid {

// Every tunable in one place, read/written as key=value text. Layering is
// defaults < config file < command-line flags; the resolved config is echoed
// into each run's output directory.
struct RunConfig {
  uint64_t seed = 0;

  // dataset
  size_t data_count = 100;
  double data_train_ratio = 0.8;
  size_t data_frames = 4;
  size_t data_height = 16;
  size_t data_width = 16;
  size_t data_speed = 2;
  size_t data_max_digits = 2;
  // "digit:phrase" pairs split on ';', e.g. "9:down then up;7:left and right"
  std::string data_holdout;

  // frame autoencoder
  size_t vq_hidden = 32;
  size_t vq_embed_dim = 16;
  size_t vq_codebook = 64;
  double vq_beta = 0.25;
  double vq_lr = 1e-3;
  size_t vq_steps = 2000;
  size_t vq_batch = 32;

  // generator
  size_t gen_dim = 64;
  size_t gen_heads = 4;
  size_t gen_layers = 3;
  size_t gen_ff_mult = 4;
  size_t gen_text_len = 16;
  double gen_lr = 5e-4;
  size_t gen_steps = 2000;
  size_t gen_batch = 1;

  // sampling
  std::string sample_strategy = "top-k";
  size_t sample_k = 10;
  double sample_temperature = 1.0;
  size_t sample_candidates = 32;

  // oracle
  std::string oracle_kind = "toy";  // toy | http
  std::string oracle_url;
  size_t oracle_dim = 19;
  double oracle_timeout_s = 5.0;
  size_t oracle_retries = 2;

  // paths (flags override the checkpoint ones)
  std::string path_data;        // dataset directory holding manifest.jsonl
  std::string path_vqvae_ckpt;
  std::string path_gen_ckpt;

  // evaluation
  std::string eval_split = "all";  // train | val | all
  size_t eval_limit = 0;           // 0 = no limit

  // media
  size_t gif_delay_cs = 25;

  void apply_line(const std::string& key, const std::string& value);  // unknown key throws
  void load_file(const std::string& path);
  std::string serialize() const;
  void save_file(const std::string& path) const;

  void validate() const;

  data::SceneConfig scene_config() const;
  data::DatasetBuildConfig dataset_config() const;
  vq::VqConfig vq_config() const;
  vq::VqTrainConfig vq_train_config() const;
  dec::DecoderConfig decoder_config() const;
  dec::GenTrainConfig gen_train_config() const;
  sampling::SamplingConfig sampling_config() const;
  std::vector<std::pair<int, data::Motion>> holdout_pairs() const;
};

}  // namespace gridvid
