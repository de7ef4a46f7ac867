#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "hhgr/commands.hpp"
#include "hhgr/error.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides parse_overrides(const std::vector<std::string>& sets) {
  Overrides out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw hhgr::ConfigError("config: --set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

hhgr::RunConfig run_config(const std::string& path, const std::vector<std::string>& sets) {
  auto overrides = parse_overrides(sets);
  auto config = path.empty() ? hhgr::parse_config("", "<defaults>", overrides) : hhgr::load_config(path, overrides);
  hhgr::apply_environment(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical hypergraph group recommender"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_config_options = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Config file ([section] key = value)");
    cmd->add_option("--set", sets, "Override a config key, e.g. --set train.epochs=5");
  };

  auto* train = app.add_subcommand("train", "Train a model and evaluate it on the test split");
  add_config_options(train);

  auto* ablate = app.add_subcommand("ablate", "Train several variants on shared data and compare them");
  add_config_options(ablate);
  std::vector<std::string> variants;
  ablate->add_option("--variants", variants, "HHGR, S2, HHGR-wu, HHGR-wg, HHGR-F, HHGR-C")
      ->delimiter(',')
      ->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  hhgr::EvaluateOptions eval_opts;
  std::string ks_text = "20,50", denominator = "min", mode_text;
  std::uint64_t split_seed = 0;
  evaluate->add_option("--checkpoint", eval_opts.checkpoint)->required();
  evaluate->add_option("--data", eval_opts.data_dir, "Dataset directory")->required();
  evaluate->add_option("--ks", ks_text, "Comma-separated cut-offs");
  evaluate->add_option("--mode", mode_text, "Defaults to the mode stored with the checkpoint");
  auto* split_opt = evaluate->add_option("--split-seed", split_seed);
  evaluate->add_option("--recall-denominator", denominator, "min or full");
  evaluate->add_option("--buckets", eval_opts.buckets);
  evaluate->add_option("--threads", eval_opts.threads, "Worker threads (capped by HHGR_THREADS)");
  evaluate->add_option("--out", eval_opts.output, "Metrics JSON path");

  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic dataset");
  hhgr::SyntheticConfig synth_cfg;
  std::string synth_dir;
  double group_density = -1.0;
  synth->add_option("--out", synth_dir)->required();
  synth->add_option("--users", synth_cfg.num_users);
  synth->add_option("--items", synth_cfg.num_items);
  synth->add_option("--groups", synth_cfg.num_groups);
  synth->add_option("--min-group-size", synth_cfg.min_group_size);
  synth->add_option("--max-group-size", synth_cfg.max_group_size);
  synth->add_option("--density", synth_cfg.density);
  synth->add_option("--group-density", group_density);
  synth->add_option("--seed", synth_cfg.seed);

  auto* stats = app.add_subcommand("stats", "Print dataset statistics");
  std::string stats_dir;
  bool compact = false;
  stats->add_option("--data", stats_dir)->required();
  stats->add_flag("--compact-ids", compact);

  auto* dump = app.add_subcommand("dump-hypergraph", "Write incidence, projection and motif matrices");
  std::string dump_data, dump_out;
  dump->add_option("--data", dump_data)->required();
  dump->add_option("--out", dump_out)->required();
  dump->add_flag("--compact-ids", compact);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hhgr::kExitUsage;
  }

  try {
    if (*train) return hhgr::cmd_train(run_config(config_path, sets), std::cout, std::cerr);
    if (*ablate) return hhgr::cmd_ablate(run_config(config_path, sets), variants, std::cout, std::cerr);
    if (*evaluate) {
      eval_opts.ks = hhgr::parse_ks(ks_text);
      eval_opts.denominator = hhgr::parse_recall_denominator(denominator);
      if (!mode_text.empty()) eval_opts.mode = hhgr::parse_mode(mode_text);
      if (*split_opt) eval_opts.split_seed = split_seed;
      hhgr::RunConfig env;
      env.train.threads = eval_opts.threads;
      hhgr::apply_environment(env);
      eval_opts.threads = env.train.threads;
      if (std::getenv("HHGR_SEED") && !*split_opt) eval_opts.split_seed = env.split_seed;
      return hhgr::cmd_evaluate(eval_opts, std::cout, std::cerr);
    }
    if (*synth) {
      if (group_density >= 0.0) synth_cfg.group_density = group_density;
      if (const char* seed = std::getenv("HHGR_SEED"); seed && *seed) synth_cfg.seed = std::stoull(seed);
      return hhgr::cmd_synth(synth_cfg, synth_dir, std::cout, std::cerr);
    }
    if (*stats) return hhgr::cmd_stats(stats_dir, compact, std::cout, std::cerr);
    if (*dump) return hhgr::cmd_dump_hypergraph(dump_data, compact, dump_out, std::cout, std::cerr);
  } catch (const hhgr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hhgr::kExitUsage;
  }
  return hhgr::kExitUsage;
}
