// gridvid: synthetic moving-digit text-to-video pipeline.
//
// Subcommands: build-data, train-vqvae, train-gen, generate, eval,
// bench-attention. Every run echoes its resolved configuration into the
// output directory and writes a machine-readable JSON summary next to its
// human-readable log lines.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridvid/dataset.hpp"
#include "gridvid/decoder.hpp"
#include "gridvid/errors.hpp"
#include "gridvid/media.hpp"
#include "gridvid/metrics.hpp"
#include "gridvid/oracle.hpp"
#include "gridvid/run_config.hpp"
#include "gridvid/sampler.hpp"
#include "gridvid/text.hpp"
#include "gridvid/token_grid.hpp"
#include "gridvid/video.hpp"
#include "gridvid/vq_codec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  std::optional<std::string> vqvae_ckpt, gen_ckpt, strategy, oracle, oracle_url;
  std::optional<uint64_t> k, n_candidates;
  std::string text;   // generate only
  std::string sweep;  // bench-attention only
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "key=value config file");
  cmd->add_option("--seed", f.seed, "master seed (overrides config)");
  cmd->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--vqvae-ckpt", f.vqvae_ckpt, "frame autoencoder checkpoint");
  cmd->add_option("--gen-ckpt", f.gen_ckpt, "generator checkpoint");
  cmd->add_option("--strategy", f.strategy, "sampling strategy: greedy | top-k");
  cmd->add_option("--k", f.k, "top-k truncation size");
  cmd->add_option("--n-candidates", f.n_candidates, "candidates for reranking");
  cmd->add_option("--oracle", f.oracle, "similarity oracle: toy | http");
  cmd->add_option("--oracle-url", f.oracle_url, "base URL for the http oracle");
}

gridvid::RunConfig resolve(const Flags& f) {
  gridvid::RunConfig cfg;
  if (!f.config_path.empty()) cfg.load_file(f.config_path);
  if (f.seed) cfg.seed = *f.seed;
  if (f.vqvae_ckpt) cfg.path_vqvae_ckpt = *f.vqvae_ckpt;
  if (f.gen_ckpt) cfg.path_gen_ckpt = *f.gen_ckpt;
  if (f.strategy) cfg.sample_strategy = *f.strategy;
  if (f.k) cfg.sample_k = *f.k;
  if (f.n_candidates) cfg.sample_candidates = *f.n_candidates;
  if (f.oracle) cfg.oracle_kind = *f.oracle;
  if (f.oracle_url) cfg.oracle_url = *f.oracle_url;
  cfg.validate();
  return cfg;
}

void echo_config(const gridvid::RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  cfg.save_file((fs::path(out_dir) / "config.txt").string());
}

void write_json(const std::string& path, const json& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gridvid::IoError("cannot write " + path);
  out << payload.dump(2) << "\n";
}

std::unique_ptr<gridvid::SimilarityOracle> make_oracle(const gridvid::RunConfig& cfg) {
  if (cfg.oracle_kind == "http") {
    gridvid::HttpOracleConfig hcfg;
    hcfg.base_url = cfg.oracle_url;
    hcfg.dim = cfg.oracle_dim;
    hcfg.timeout_s = cfg.oracle_timeout_s;
    hcfg.retries = cfg.oracle_retries;
    return std::make_unique<gridvid::HttpOracle>(hcfg);
  }
  return std::make_unique<gridvid::ToyOracle>(cfg.scene_config());
}

struct ManifestItem {
  size_t id = 0;
  std::string split, caption, video, tokens;
};

std::vector<ManifestItem> load_manifest(const std::string& data_dir) {
  const fs::path path = fs::path(data_dir) / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw gridvid::ConfigError("cannot open dataset manifest " + path.string());
  std::vector<ManifestItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    ManifestItem item;
    item.id = rec.at("id").get<size_t>();
    item.split = rec.at("split").get<std::string>();
    item.caption = rec.at("caption").get<std::string>();
    item.video = rec.at("video").get<std::string>();
    if (rec.contains("tokens")) item.tokens = rec["tokens"].get<std::string>();
    items.push_back(std::move(item));
  }
  if (items.empty()) throw gridvid::ConfigError("dataset manifest is empty: " + path.string());
  return items;
}

std::string require(const std::string& value, const char* what) {
  if (value.empty())
    throw gridvid::ConfigError(std::string(what) +
                               " is required (flag or config key not set)");
  return value;
}

int cmd_build_data(const Flags& f) {
  const auto cfg = resolve(f);
  echo_config(cfg, f.out_dir);

  std::optional<gridvid::vq::VqParams> vq;
  if (!cfg.path_vqvae_ckpt.empty())
    vq = gridvid::vq::VqParams::load(cfg.path_vqvae_ckpt, cfg.vq_config());

  const auto items =
      gridvid::data::build_dataset(f.out_dir, cfg.dataset_config(), vq ? &*vq : nullptr);
  size_t train = 0, val = 0;
  for (const auto& item : items) (item.split == "train" ? train : val) += 1;

  json summary{{"scenes", items.size()}, {"train", train}, {"val", val},
               {"tokens_included", bool(vq)}};
  write_json((fs::path(f.out_dir) / "build_data.json").string(), summary);
  std::cout << "built " << items.size() << " scenes (" << train << " train, " << val
            << " val) in " << f.out_dir << "\n";
  return 0;
}

int cmd_train_vqvae(const Flags& f) {
  const auto cfg = resolve(f);
  echo_config(cfg, f.out_dir);
  const auto items = load_manifest(require(cfg.path_data, "path.data"));

  std::vector<gridvid::VideoTensor> videos;
  for (const auto& item : items)
    if (item.split == "train")
      videos.push_back(gridvid::load_video((fs::path(cfg.path_data) / item.video).string()));
  if (videos.empty()) throw gridvid::ConfigError("no train-split videos in " + cfg.path_data);

  json log_rows = json::array();
  const auto params = gridvid::vq::train_vqvae(
      videos, cfg.vq_config(), cfg.vq_train_config(),
      [&log_rows](const gridvid::vq::VqTrainStats& s) {
        std::cout << "step " << s.step << "  loss " << s.loss.total << "  rec "
                  << s.loss.reconstruction << "  mse " << s.pixel_mse << "\n";
        log_rows.push_back({{"step", s.step},
                            {"loss", s.loss.total},
                            {"reconstruction", s.loss.reconstruction},
                            {"codebook", s.loss.codebook},
                            {"commitment", s.loss.commitment},
                            {"pixel_mse", s.pixel_mse}});
      });

  const std::string ckpt = (fs::path(f.out_dir) / "vqvae.gdva").string();
  params.save(ckpt);
  double final_mse = 0.0;
  for (const auto& item : items)
    if (item.split == "train") {
      const auto v = gridvid::load_video((fs::path(cfg.path_data) / item.video).string());
      final_mse += gridvid::vq::reconstruction_mse(v, params) / double(videos.size());
    }
  write_json((fs::path(f.out_dir) / "train_vqvae.json").string(),
             {{"checkpoint", ckpt}, {"videos", videos.size()}, {"final_mse", final_mse},
              {"log", log_rows}});
  std::cout << "saved " << ckpt << "  train-set mse " << final_mse << "\n";
  return 0;
}

int cmd_train_gen(const Flags& f) {
  const auto cfg = resolve(f);
  echo_config(cfg, f.out_dir);
  const auto vq =
      gridvid::vq::VqParams::load(require(cfg.path_vqvae_ckpt, "--vqvae-ckpt"), cfg.vq_config());
  const auto items = load_manifest(require(cfg.path_data, "path.data"));
  const auto& vocab = gridvid::Vocabulary::captions();

  std::vector<std::pair<gridvid::TextSequence, gridvid::TokenGrid>> pairs;
  for (const auto& item : items) {
    if (item.split != "train") continue;
    const auto video = gridvid::load_video((fs::path(cfg.path_data) / item.video).string());
    pairs.emplace_back(vocab.tokenize(item.caption, cfg.gen_text_len),
                       gridvid::vq::encode_video(video, vq));
  }
  if (pairs.empty()) throw gridvid::ConfigError("no train-split pairs in " + cfg.path_data);

  json log_rows = json::array();
  const auto params = gridvid::dec::train_decoder(
      pairs, cfg.decoder_config(), vq.codebook, cfg.gen_train_config(),
      [&log_rows](const gridvid::dec::GenTrainStats& s) {
        std::cout << "step " << s.step << "  loss " << s.loss << "\n";
        log_rows.push_back({{"step", s.step}, {"loss", s.loss}});
      });

  const std::string ckpt = (fs::path(f.out_dir) / "gen.gdva").string();
  params.save(ckpt);
  write_json((fs::path(f.out_dir) / "train_gen.json").string(),
             {{"checkpoint", ckpt}, {"pairs", pairs.size()}, {"log", log_rows}});
  std::cout << "saved " << ckpt << " after " << cfg.gen_steps << " steps on " << pairs.size()
            << " pairs\n";
  return 0;
}

int cmd_generate(const Flags& f) {
  const auto cfg = resolve(f);
  if (f.text.empty()) throw gridvid::ConfigError("--text is required");
  echo_config(cfg, f.out_dir);

  const auto vq =
      gridvid::vq::VqParams::load(require(cfg.path_vqvae_ckpt, "--vqvae-ckpt"), cfg.vq_config());
  const auto gen = gridvid::dec::DecoderParams::load(require(cfg.path_gen_ckpt, "--gen-ckpt"),
                                                     cfg.decoder_config());
  const auto patterns = gridvid::attn::build_patterns(cfg.decoder_config().grid());
  const auto text = gridvid::Vocabulary::captions().tokenize(f.text, cfg.gen_text_len);
  auto scfg = cfg.sampling_config();

  gridvid::TokenGrid best_tokens;
  gridvid::VideoTensor best_video;
  json result{{"text", f.text},
              {"strategy", gridvid::sampling::strategy_name(scfg.strategy)},
              {"seed", cfg.seed}};

  const bool rerank =
      scfg.strategy == gridvid::sampling::Strategy::TopK && scfg.candidates > 1;
  if (rerank) {
    const auto oracle = make_oracle(cfg);
    const auto picked = gridvid::sampling::best_of_n(text, f.text, gen, patterns, vq, scfg,
                                                     *oracle);
    const fs::path cand_dir = fs::path(f.out_dir) / "candidates";
    fs::create_directories(cand_dir);
    std::ofstream report(fs::path(f.out_dir) / "candidates.jsonl", std::ios::binary);
    for (const auto& cand : picked.candidates) {
      std::string num = std::to_string(cand.index);
      while (num.size() < 3) num.insert(num.begin(), '0');
      const std::string grid_path = (cand_dir / ("cand_" + num + ".gdtk")).string();
      gridvid::save_token_grid(grid_path, cand.tokens);
      report << json{{"index", cand.index}, {"score", cand.score}, {"tokens", grid_path}}.dump()
             << "\n";
    }
    best_tokens = picked.best().tokens;
    best_video = picked.best().video;
    result["candidates"] = scfg.candidates;
    result["best_index"] = picked.best_index;
    result["best_score"] = picked.best_score;
    std::cout << "best candidate " << picked.best_index << " score " << picked.best_score
              << "\n";
  } else {
    best_tokens = gridvid::sampling::generate(text, gen, patterns, scfg, 0);
    best_video = gridvid::vq::decode_tokens(best_tokens, vq);
  }

  gridvid::save_token_grid((fs::path(f.out_dir) / "tokens.gdtk").string(), best_tokens);
  gridvid::save_video((fs::path(f.out_dir) / "video.gdvv").string(), best_video);
  gridvid::media::export_frames_png((fs::path(f.out_dir) / "frames").string(), best_video);
  gridvid::media::save_gif((fs::path(f.out_dir) / "video.gif").string(), best_video,
                           cfg.gif_delay_cs);
  write_json((fs::path(f.out_dir) / "result.json").string(), result);
  std::cout << "wrote video.gdvv, tokens.gdtk, frames/, video.gif to " << f.out_dir << "\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto cfg = resolve(f);
  echo_config(cfg, f.out_dir);
  const auto vq =
      gridvid::vq::VqParams::load(require(cfg.path_vqvae_ckpt, "--vqvae-ckpt"), cfg.vq_config());
  const auto gen = gridvid::dec::DecoderParams::load(require(cfg.path_gen_ckpt, "--gen-ckpt"),
                                                     cfg.decoder_config());
  const auto patterns = gridvid::attn::build_patterns(cfg.decoder_config().grid());
  const auto oracle = make_oracle(cfg);
  const auto& vocab = gridvid::Vocabulary::captions();
  auto scfg = cfg.sampling_config();

  std::vector<gridvid::metrics::SamplePair> pairs;
  std::vector<std::string> texts;
  for (const auto& item : load_manifest(require(cfg.path_data, "path.data"))) {
    if (cfg.eval_split != "all" && item.split != cfg.eval_split) continue;
    if (cfg.eval_limit && pairs.size() >= cfg.eval_limit) break;
    const auto text = vocab.tokenize(item.caption, cfg.gen_text_len);
    gridvid::VideoTensor predicted;
    if (scfg.strategy == gridvid::sampling::Strategy::TopK && scfg.candidates > 1) {
      predicted = gridvid::sampling::best_of_n(text, item.caption, gen, patterns, vq, scfg,
                                               *oracle)
                      .best()
                      .video;
    } else {
      predicted = gridvid::vq::decode_tokens(
          gridvid::sampling::generate(text, gen, patterns, scfg, 0), vq);
    }
    pairs.push_back({item.caption,
                     std::move(predicted),
                     gridvid::load_video((fs::path(cfg.path_data) / item.video).string())});
    texts.push_back(item.caption);
  }
  if (pairs.empty()) throw gridvid::ConfigError("eval selection is empty");

  const auto report = gridvid::metrics::corpus_eval(pairs, *oracle);
  json samples = json::array();
  for (size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    samples.push_back({{"text", texts[i]},
                       {"sim", s.sim},
                       {"rm", s.rm_defined ? json(s.rm) : json(nullptr)}});
  }
  write_json((fs::path(f.out_dir) / "metrics.json").string(),
             {{"mean_sim_x100", report.mean_sim_x100},
              {"mean_rm", report.mean_rm},
              {"undefined_rm", report.undefined_rm},
              {"samples", samples}});
  gridvid::metrics::write_sim_matrix_csv((fs::path(f.out_dir) / "sim_matrix.csv").string(),
                                         texts, report.sim_matrix);
  std::cout << "evaluated " << pairs.size() << " samples  mean SIM(x100) "
            << report.mean_sim_x100 << "  mean RM " << report.mean_rm << "\n";
  return 0;
}

// Each sweep entry is a L:h:w:N grid-and-text-length shape. Axis pairs are the
// exact per-query key counts summed over the three axes (self included); the
// axis budget is the coarse envelope L*h*w*(L+h+w); text pairs count every
// query attending all N text rows in each of the three axis layers.
int cmd_bench_attention(const Flags& f) {
  fs::create_directories(f.out_dir);
  const std::string sweep =
      f.sweep.empty() ? "2:2:2:8,4:4:4:16,8:8:8:24,10:16:16:35" : f.sweep;

  json rows = json::array();
  std::printf("%6s %4s %4s %4s | %10s | %10s | %10s | %10s | %s\n", "frames", "rows", "cols",
              "text", "dense", "axis pairs", "budget", "text pairs", "dense/budget");
  std::istringstream in(sweep);
  std::string part;
  while (std::getline(in, part, ',')) {
    unsigned long l = 0, h = 0, w = 0, n = 0;
    if (std::sscanf(part.c_str(), "%lu:%lu:%lu:%lu", &l, &h, &w, &n) != 4 || !l || !h || !w)
      throw gridvid::ConfigError("bad --sweep entry '" + part + "' (want L:h:w:N)");
    const gridvid::attn::GridShape grid{l, h, w};
    const size_t dense = gridvid::attn::dense_pair_count(grid);
    const size_t exact = gridvid::attn::exact_axis_pair_count(grid);
    const size_t budget = gridvid::attn::formula_axis_pair_count(grid);
    const size_t text_pairs = 3 * grid.cells() * size_t(n);
    const double ratio = double(dense) / double(budget);
    std::printf("%6lu %4lu %4lu %4lu | %10zu | %10zu | %10zu | %10zu | %.2f\n", l, h, w, n,
                dense, exact, budget, text_pairs, ratio);
    rows.push_back({{"frames", l}, {"rows", h}, {"cols", w}, {"text_len", n},
                    {"dense", dense}, {"axis_pairs", exact}, {"axis_budget", budget},
                    {"text_pairs", text_pairs}, {"dense_over_budget", ratio}});
  }
  write_json((fs::path(f.out_dir) / "bench_attention.json").string(), {{"rows", rows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic moving-digit text-to-video pipeline"};
  app.require_subcommand(1);

  Flags flags;
  auto* build_data = app.add_subcommand("build-data", "render scenes, captions, manifest");
  auto* train_vqvae = app.add_subcommand("train-vqvae", "train the frame autoencoder");
  auto* train_gen = app.add_subcommand("train-gen", "train the autoregressive generator");
  auto* generate = app.add_subcommand("generate", "text to video");
  auto* eval = app.add_subcommand("eval", "similarity metrics over a dataset");
  auto* bench = app.add_subcommand("bench-attention", "attention pair-count table");
  for (auto* cmd : {build_data, train_vqvae, train_gen, generate, eval, bench})
    add_common(cmd, flags);
  generate->add_option("--text", flags.text, "caption to generate from");
  bench->add_option("--sweep", flags.sweep, "comma-separated L:h:w:N shape list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (build_data->parsed()) return cmd_build_data(flags);
    if (train_vqvae->parsed()) return cmd_train_vqvae(flags);
    if (train_gen->parsed()) return cmd_train_gen(flags);
    if (generate->parsed()) return cmd_generate(flags);
    if (eval->parsed()) return cmd_eval(flags);
    if (bench->parsed()) return cmd_bench_attention(flags);
  } catch (const gridvid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gridvid::TokenizerError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
