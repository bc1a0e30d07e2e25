#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "stylemix/harness.hpp"

namespace fs = std::filesystem;
using namespace stylemix;

namespace {

SplitData load_dataset_split(const std::string& data_dir, const std::string& split, int size) {
  const DatasetManifest manifest = read_manifest((fs::path(data_dir) / "manifest.tsv").string());
  return load_split(manifest, data_dir, split, size);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain image translation trainer and evaluator"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Run a training loop");
  std::string cfg_path, setting = "mmuit", out_dir;
  int64_t seed_flag = -1;
  train_cmd->add_option("--config", cfg_path, "Config file (key=value lines)")->required();
  train_cmd->add_option("--setting", setting, "mmuit or tunit");
  train_cmd->add_option("--seed", seed_flag, "Overrides the config seed");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt_path, metrics_csv = "fid,lpips,ppl,p2,p2eq", eval_out;
  int num_sources = 200, t_steps = 20;
  int64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval_cmd->add_option("--metrics", metrics_csv, "Comma-separated metric list");
  eval_cmd->add_option("--num-sources", num_sources, "Sources per domain pair");
  eval_cmd->add_option("--steps", t_steps, "Interpolation steps T");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--out", eval_out, "Report output file")->required();

  // interp
  auto* interp_cmd = app.add_subcommand("interp", "Render an interpolation grid");
  std::string i_ckpt, i_src, i_ra, i_rb, i_out;
  int i_steps = 20;
  bool intra = false;
  interp_cmd->add_option("--checkpoint", i_ckpt)->required();
  interp_cmd->add_option("--source", i_src)->required();
  interp_cmd->add_option("--ref-a", i_ra)->required();
  interp_cmd->add_option("--ref-b", i_rb)->required();
  interp_cmd->add_option("--steps", i_steps, "Frames T");
  interp_cmd->add_option("--out", i_out)->required();
  interp_cmd->add_flag("--intra", intra, "Require both references in one domain");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic dataset");
  int s_domains = 2, s_per = 2000, s_test = -1, s_size = 64;
  uint64_t s_seed = 7;
  std::string s_out;
  synth_cmd->add_option("--domains", s_domains, "Number of domains");
  synth_cmd->add_option("--per-domain", s_per, "Train images per domain");
  synth_cmd->add_option("--test-per-domain", s_test, "Test images per domain (default 10%)");
  synth_cmd->add_option("--size", s_size, "Image size");
  synth_cmd->add_option("--seed", s_seed, "Generation seed");
  synth_cmd->add_option("--out", s_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      TrainConfig cfg = load_config(cfg_path);
      cfg.setting = setting_from_string(setting);
      if (seed_flag >= 0) cfg.seed = static_cast<uint64_t>(seed_flag);
      if (cfg.data_dir.empty()) throw std::runtime_error("config: data_dir is required");
      SplitData data = load_dataset_split(cfg.data_dir, "train", cfg.net.img_size);
      TrainState state = make_train_state(cfg);
      fs::create_directories(out_dir);
      save_config(cfg, (fs::path(out_dir) / "config.txt").string());
      train(state, data, out_dir);
    } else if (*eval_cmd) {
      EvalContext ctx = load_eval_context(ckpt_path);
      if (ctx.cfg.data_dir.empty())
        throw std::runtime_error("checkpoint config has no data_dir");
      SplitData test = load_dataset_split(ctx.cfg.data_dir, "test", ctx.cfg.net.img_size);
      SplitData train_split = load_dataset_split(ctx.cfg.data_dir, "train", ctx.cfg.net.img_size);
      EvalParams params;
      params.metrics = split_csv(metrics_csv);
      params.num_sources = num_sources;
      params.t_steps = t_steps;
      params.seed = static_cast<uint64_t>(eval_seed);
      EvalReport report = run_interpolation_eval(ctx, test, train_split, params);
      report.write(eval_out);
      std::printf("%s", report.to_text().c_str());
    } else if (*interp_cmd) {
      EvalContext ctx = load_eval_context(i_ckpt);
      if (intra)
        intra_domain_grid(ctx, i_src, i_ra, i_rb, i_steps, i_out);
      else
        render_interpolation_grid(ctx, i_src, i_ra, i_rb, i_steps, i_out);
    } else if (*synth_cmd) {
      if (s_test < 0) s_test = std::max(1, s_per / 10);
      generate_synthetic(default_synthetic_specs(s_domains), s_per, s_test, s_size, s_seed,
                         s_out);
      std::printf("wrote %d domains x (%d train + %d test) images to %s\n", s_domains, s_per,
                  s_test, s_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
