#include "gridvid/run_config.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include "gridvid/errors.hpp"

namespace gridvid {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                      value + "'");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

std::string format_f64(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Entry {
  const char* key;
  enum Kind { U64, F64, Str } kind;
  // Exactly one of these is used, per kind. size_t and uint64_t members share
  // the U64 slot (identical type on this platform).
  size_t RunConfig::* u = nullptr;
  double RunConfig::* f = nullptr;
  std::string RunConfig::* s = nullptr;
};

static_assert(std::is_same_v<size_t, uint64_t>,
              "the config table stores seed and counters through one member-pointer type");

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"seed", Entry::U64, &RunConfig::seed},
      {"data.count", Entry::U64, &RunConfig::data_count},
      {"data.train_ratio", Entry::F64, nullptr, &RunConfig::data_train_ratio},
      {"data.frames", Entry::U64, &RunConfig::data_frames},
      {"data.height", Entry::U64, &RunConfig::data_height},
      {"data.width", Entry::U64, &RunConfig::data_width},
      {"data.speed", Entry::U64, &RunConfig::data_speed},
      {"data.max_digits", Entry::U64, &RunConfig::data_max_digits},
      {"data.holdout", Entry::Str, nullptr, nullptr, &RunConfig::data_holdout},
      {"vq.hidden", Entry::U64, &RunConfig::vq_hidden},
      {"vq.embed_dim", Entry::U64, &RunConfig::vq_embed_dim},
      {"vq.codebook", Entry::U64, &RunConfig::vq_codebook},
      {"vq.beta", Entry::F64, nullptr, &RunConfig::vq_beta},
      {"vq.lr", Entry::F64, nullptr, &RunConfig::vq_lr},
      {"vq.steps", Entry::U64, &RunConfig::vq_steps},
      {"vq.batch", Entry::U64, &RunConfig::vq_batch},
      {"gen.dim", Entry::U64, &RunConfig::gen_dim},
      {"gen.heads", Entry::U64, &RunConfig::gen_heads},
      {"gen.layers", Entry::U64, &RunConfig::gen_layers},
      {"gen.ff_mult", Entry::U64, &RunConfig::gen_ff_mult},
      {"gen.text_len", Entry::U64, &RunConfig::gen_text_len},
      {"gen.lr", Entry::F64, nullptr, &RunConfig::gen_lr},
      {"gen.steps", Entry::U64, &RunConfig::gen_steps},
      {"gen.batch", Entry::U64, &RunConfig::gen_batch},
      {"sample.strategy", Entry::Str, nullptr, nullptr, &RunConfig::sample_strategy},
      {"sample.k", Entry::U64, &RunConfig::sample_k},
      {"sample.temperature", Entry::F64, nullptr, &RunConfig::sample_temperature},
      {"sample.candidates", Entry::U64, &RunConfig::sample_candidates},
      {"oracle.kind", Entry::Str, nullptr, nullptr, &RunConfig::oracle_kind},
      {"oracle.url", Entry::Str, nullptr, nullptr, &RunConfig::oracle_url},
      {"oracle.dim", Entry::U64, &RunConfig::oracle_dim},
      {"oracle.timeout_s", Entry::F64, nullptr, &RunConfig::oracle_timeout_s},
      {"oracle.retries", Entry::U64, &RunConfig::oracle_retries},
      {"path.data", Entry::Str, nullptr, nullptr, &RunConfig::path_data},
      {"path.vqvae_ckpt", Entry::Str, nullptr, nullptr, &RunConfig::path_vqvae_ckpt},
      {"path.gen_ckpt", Entry::Str, nullptr, nullptr, &RunConfig::path_gen_ckpt},
      {"eval.split", Entry::Str, nullptr, nullptr, &RunConfig::eval_split},
      {"eval.limit", Entry::U64, &RunConfig::eval_limit},
      {"gif.delay_cs", Entry::U64, &RunConfig::gif_delay_cs},
  };
  return table;
}

}  // namespace

void RunConfig::apply_line(const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key != e.key) continue;
    switch (e.kind) {
      case Entry::U64: this->*(e.u) = size_t(parse_u64(key, value)); break;
      case Entry::F64: this->*(e.f) = parse_f64(key, value); break;
      case Entry::Str: this->*(e.s) = value; break;
    }
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_line(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  for (const auto& e : entries()) {
    out << e.key << "=";
    switch (e.kind) {
      case Entry::U64: out << this->*(e.u); break;
      case Entry::F64: out << format_f64(this->*(e.f)); break;
      case Entry::Str: out << this->*(e.s); break;
    }
    out << "\n";
  }
  return out.str();
}

void RunConfig::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config file " + path);
  out << serialize();
}

std::vector<std::pair<int, data::Motion>> RunConfig::holdout_pairs() const {
  std::vector<std::pair<int, data::Motion>> out;
  std::istringstream in(data_holdout);
  std::string part;
  while (std::getline(in, part, ';')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos)
      throw ConfigError("data.holdout entry '" + t + "': expected digit:phrase");
    const uint64_t digit = parse_u64("data.holdout", trim(t.substr(0, colon)));
    if (digit > 9) throw ConfigError("data.holdout digit must be in [0,9]");
    out.emplace_back(int(digit), data::motion_from_phrase(trim(t.substr(colon + 1))));
  }
  return out;
}

data::SceneConfig RunConfig::scene_config() const {
  return {data_frames, data_height, data_width, data_speed};
}

data::DatasetBuildConfig RunConfig::dataset_config() const {
  data::DatasetBuildConfig cfg;
  cfg.scene = scene_config();
  cfg.count = data_count;
  cfg.train_ratio = data_train_ratio;
  cfg.max_digits = data_max_digits;
  cfg.seed = seed;
  cfg.holdout = holdout_pairs();
  return cfg;
}

vq::VqConfig RunConfig::vq_config() const {
  vq::VqConfig cfg;
  cfg.frames = data_frames;
  cfg.height = data_height;
  cfg.width = data_width;
  cfg.channels = 1;
  cfg.hidden = vq_hidden;
  cfg.embed_dim = vq_embed_dim;
  cfg.codebook_size = vq_codebook;
  cfg.beta = vq_beta;
  return cfg;
}

vq::VqTrainConfig RunConfig::vq_train_config() const {
  return {vq_lr, vq_steps, vq_batch, seed, 100};
}

dec::DecoderConfig RunConfig::decoder_config() const {
  dec::DecoderConfig cfg;
  const auto vq = vq_config();
  cfg.frames = data_frames;
  cfg.rows = vq.latent_rows();
  cfg.cols = vq.latent_cols();
  cfg.text_len = gen_text_len;
  cfg.text_vocab = Vocabulary::captions().size();
  cfg.vocab = vq_codebook;
  cfg.codebook_dim = vq_embed_dim;
  cfg.dim = gen_dim;
  cfg.heads = gen_heads;
  cfg.layers = gen_layers;
  cfg.ff_mult = gen_ff_mult;
  return cfg;
}

dec::GenTrainConfig RunConfig::gen_train_config() const {
  return {gen_lr, gen_steps, gen_batch, seed, 50};
}

sampling::SamplingConfig RunConfig::sampling_config() const {
  sampling::SamplingConfig cfg;
  cfg.strategy = sampling::strategy_from_name(sample_strategy);
  cfg.k = sample_k;
  cfg.temperature = sample_temperature;
  cfg.candidates = sample_candidates;
  cfg.seed = seed;
  return cfg;
}

void RunConfig::validate() const {
  scene_config().validate();
  vq_config().validate();
  decoder_config().validate();
  sampling_config().validate(vq_codebook);
  holdout_pairs();
  if (data_count < 1) throw ConfigError("data.count must be >= 1");
  if (data_train_ratio < 0.0 || data_train_ratio > 1.0)
    throw ConfigError("data.train_ratio must be in [0,1]");
  if (data_max_digits < 1 || data_max_digits > 2)
    throw ConfigError("data.max_digits must be 1 or 2");
  if (oracle_kind != "toy" && oracle_kind != "http")
    throw ConfigError("oracle.kind must be 'toy' or 'http'");
  if (oracle_kind == "http" && oracle_url.empty())
    throw ConfigError("oracle.url is required when oracle.kind=http");
  if (eval_split != "train" && eval_split != "val" && eval_split != "all")
    throw ConfigError("eval.split must be train, val, or all");
  if (vq_steps < 1 || gen_steps < 1) throw ConfigError("training steps must be >= 1");
  if (!(vq_lr > 0.0) || !(gen_lr > 0.0)) throw ConfigError("learning rates must be > 0");
}

}  // namespace gridvid
