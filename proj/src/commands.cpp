#include "hhgr/commands.hpp"

#include <fstream>
#include <functional>
#include <iostream>

#include "hhgr/checkpoint.hpp"
#include "hhgr/error.hpp"
#include "hhgr/hypergraph.hpp"

namespace hhgr {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("io: cannot write " + path.string());
  os << text;
  if (!os) throw Error("io: failed writing " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io: cannot create " + dir.string() + ": " + ec.message());
}

nlohmann::json metrics_document(const MetricsReport& report, const std::vector<BucketReport>& buckets,
                                const std::vector<std::string>& bucket_warnings, Mode mode) {
  auto j = to_json(report);
  j["mode"] = std::string(mode_name(mode));
  j["buckets"] = to_json(buckets);
  auto warnings = nlohmann::json::array();
  for (const auto& w : report.warnings) warnings.push_back(w);
  for (const auto& w : bucket_warnings) warnings.push_back(w);
  j["warnings"] = warnings;
  return j;
}

struct TrainedRun {
  TrainResult result;
  MetricsReport test;
  std::vector<BucketReport> buckets;
  std::vector<std::string> bucket_warnings;
};

TrainedRun train_and_test(const RunConfig& config, const SplitDataset& split, const GroupStructure& structure,
                          const TrainConfig& train_config) {
  TrainedRun run;
  run.result = train(split, structure, train_config);
  const auto logits =
      group_item_logits(forward_ssl(run.result.params, structure, full_views(structure), train_config.mode));
  run.test = evaluate_scores(logits, split.test, split.train.group_item, config.eval);
  run.buckets = sparsity_buckets(logits, split, config.buckets, config.eval, &run.bucket_warnings);
  return run;
}

}  // namespace

InteractionDataset load_dataset_dir(const std::filesystem::path& dir, bool compact_ids) {
  return load_dataset(DatasetPaths::in_directory(dir), LoadOptions{compact_ids});
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch},        {"stage", std::string(stage_name(r.stage))},
                   {"steps", r.steps},        {"l_ui", r.loss.l_ui},
                   {"l_gi", r.loss.l_gi},     {"l_uu", r.loss.l_uu},
                   {"total", r.loss.total},   {"beta", r.loss.beta},
                   {"seconds", r.seconds}};
  j["val"] = r.validation ? to_json(*r.validation)["metrics"] : nlohmann::json(nullptr);
  return j;
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (config.data_dir.empty()) throw ConfigError("config: data.dir is required");
    const auto ds = load_dataset_dir(config.data_dir, config.compact_ids);
    const auto split = split_groups(ds, SplitRatios{}, config.split_seed);
    const auto dir = config.output_dir();
    ensure_directory(dir);
    write_text(dir / "config.echo", echo_config(config));

    std::ofstream log(dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw Error("io: cannot write " + (dir / "train_log.jsonl").string());
    TrainConfig tc = config.train;
    tc.on_epoch = [&](const EpochRecord& r, const ModelParams&) { log << to_json(r).dump() << '\n' << std::flush; };

    const auto structure = build_structure(split.train, tc.densify_threshold);
    auto run = train_and_test(config, split, structure, tc);
    const auto& result = run.result;

    auto shape = result.params.shape();
    shape.groups = ds.num_groups;
    save_checkpoint(dir / "checkpoint.bin", result.params, shape);
    auto sidecar = checkpoint_sidecar(result.params, shape, hyperparameters_json(config));
    sidecar["best_epoch"] = result.log.best_epoch ? nlohmann::json(*result.log.best_epoch) : nlohmann::json(nullptr);
    sidecar["diverged"] = result.log.diverged;
    write_text(dir / "checkpoint.json", sidecar.dump(2) + "\n");

    if (result.log.diverged) {
      err << "error: train: diverged (" << result.log.diagnostic << "); last-good checkpoint kept at "
          << (dir / "checkpoint.bin").string() << '\n';
      return int{kExitRuntime};
    }
    write_text(dir / "metrics.json",
               metrics_document(run.test, run.buckets, run.bucket_warnings, tc.mode).dump(2) + "\n");
    for (const auto& w : run.test.warnings) err << "warning: " << w << '\n';
    for (const auto& w : run.bucket_warnings) err << "warning: " << w << '\n';
    out << format_metrics_table(config.data_dir.filename().string(),
                                {{std::string(mode_name(tc.mode)), run.test}});
    out << "outputs written to " << dir.string() << '\n';
    return int{kExitOk};
  });
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto ck = load_checkpoint(options.checkpoint);
    nlohmann::json hyper;
    auto sidecar_path = options.checkpoint;
    sidecar_path.replace_extension(".json");
    if (std::ifstream in(sidecar_path); in) {
      try {
        hyper = nlohmann::json::parse(in).value("hyperparameters", nlohmann::json::object());
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint: cannot parse " + sidecar_path.string() + ": " + e.what());
      }
    }
    auto from_sidecar = [&](const char* key) -> std::optional<std::string> {
      if (hyper.contains(key) && hyper[key].is_string()) return hyper[key].get<std::string>();
      return std::nullopt;
    };
    RunConfig saved;
    for (const char* key : {"run.mode", "data.split_seed", "data.compact_ids"}) {
      if (auto value = from_sidecar(key)) apply_setting(saved, key, *value);
    }
    const Mode mode = options.mode.value_or(saved.train.mode);
    const auto split_seed = options.split_seed.value_or(saved.split_seed);
    const bool compact = options.compact_ids.value_or(saved.compact_ids);

    const auto ds = load_dataset_dir(options.data_dir, compact);
    require_compatible(ck.shape, ds);
    const auto split = split_groups(ds, SplitRatios{}, split_seed);
    const auto structure = build_structure(split.train);
    EvalOptions eval{options.ks, options.denominator, options.threads};
    const auto logits = group_item_logits(forward_ssl(ck.params, structure, full_views(structure), mode));
    const auto report = evaluate_scores(logits, split.test, split.train.group_item, eval);
    std::vector<std::string> warnings;
    const auto buckets = sparsity_buckets(logits, split, options.buckets, eval, &warnings);
    const auto doc = metrics_document(report, buckets, warnings, mode);
    if (!options.output.empty()) {
      if (options.output.has_parent_path()) ensure_directory(options.output.parent_path());
      write_text(options.output, doc.dump(2) + "\n");
    }
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    out << format_metrics_table(options.data_dir.filename().string(), {{std::string(mode_name(mode)), report}});
    if (options.output.empty()) out << doc.dump(2) << '\n';
    return int{kExitOk};
  });
}

int cmd_ablate(const RunConfig& config, const std::vector<std::string>& variants, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    if (variants.empty()) throw ConfigError("ablate: no variants given");
    std::vector<Mode> modes;
    for (const auto& v : variants) modes.push_back(parse_mode(v));
    if (config.data_dir.empty()) throw ConfigError("config: data.dir is required");
    const auto ds = load_dataset_dir(config.data_dir, config.compact_ids);
    const auto split = split_groups(ds, SplitRatios{}, config.split_seed);
    const auto structure = build_structure(split.train, config.train.densify_threshold);
    const auto dir = config.output_dir();
    ensure_directory(dir);
    write_text(dir / "config.echo", echo_config(config));

    const auto k = *std::max_element(config.eval.ks.begin(), config.eval.ks.end());
    std::vector<std::pair<std::string, MetricsReport>> rows;
    auto doc = nlohmann::json::array();
    int code = kExitOk;
    for (Mode mode : modes) {
      TrainConfig tc = config.train;
      tc.mode = mode;
      auto run = train_and_test(config, split, structure, tc);
      if (run.result.log.diverged) {
        err << "error: train: " << mode_name(mode) << " diverged (" << run.result.log.diagnostic << ")\n";
        code = kExitRuntime;
      }
      auto entry = to_json(run.test);
      entry["mode"] = std::string(mode_name(mode));
      entry["diverged"] = run.result.log.diverged;
      doc.push_back(entry);
      rows.emplace_back(std::string(mode_name(mode)), run.test);
    }
    const auto table = format_ablation_table(config.data_dir.filename().string(), k, rows);
    write_text(dir / "ablation.txt", table);
    write_text(dir / "ablation.json", doc.dump(2) + "\n");
    out << table;
    return code;
  });
}

int cmd_synth(const SyntheticConfig& config, const std::filesystem::path& dir, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const auto ds = generate_synthetic(config);
    ensure_directory(dir);
    save_dataset(ds, DatasetPaths::in_directory(dir));
    const auto stats = format_stats(ds, dir.filename().string());
    write_text(dir / "stats.txt", stats);
    out << stats;
    return int{kExitOk};
  });
}

int cmd_stats(const std::filesystem::path& data_dir, bool compact_ids, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    out << format_stats(load_dataset_dir(data_dir, compact_ids), data_dir.filename().string());
    return int{kExitOk};
  });
}

int cmd_dump_hypergraph(const std::filesystem::path& data_dir, bool compact_ids,
                        const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto ds = load_dataset_dir(data_dir, compact_ids);
    const auto h = build_user_level(ds.membership, ds.num_users);
    const auto projection = project_groups(h);
    const auto motif = motif_adjacency(projection);
    ensure_directory(out_dir);
    write_coordinate_list(out_dir / "incidence.tsv", h);
    write_coordinate_list(out_dir / "projection.tsv", projection);
    write_coordinate_list(out_dir / "motif.tsv", motif.triangles);
    out << "incidence " << h.vertices() << "x" << h.edges() << " nnz=" << h.nnz() << '\n'
        << "projection nnz=" << projection.nonZeros() << '\n'
        << "motif nnz=" << motif.triangles.nonZeros() << '\n';
    return int{kExitOk};
  });
}

}  // namespace hhgr
