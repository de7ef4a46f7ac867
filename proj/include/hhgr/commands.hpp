#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hhgr/config.hpp"
#include "hhgr/train.hpp"

namespace hhgr {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Loads `<dir>/users.tsv`, `groups_items.tsv`, `membership.tsv`.
InteractionDataset load_dataset_dir(const std::filesystem::path& dir, bool compact_ids);

nlohmann::json to_json(const EpochRecord& record);

/// Trains, then writes config.echo, checkpoint.bin, checkpoint.json,
/// train_log.jsonl and metrics.json (test split) into config.output_dir().
/// A diverged run still writes its last-good checkpoint and returns kExitRuntime.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data_dir;
  /// Taken from the checkpoint's JSON sidecar when not given.
  std::optional<Mode> mode;
  std::optional<std::uint64_t> split_seed;
  std::optional<bool> compact_ids;
  std::vector<std::size_t> ks{20, 50};
  RecallDenominator denominator = RecallDenominator::Min;
  std::size_t buckets = 4;
  std::size_t threads = 1;
  std::filesystem::path output;  // metrics JSON; empty = stdout only
};

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);

/// Trains every variant with the shared seed and data; prints one table at the
/// largest configured K and writes ablation.json / ablation.txt.
int cmd_ablate(const RunConfig& config, const std::vector<std::string>& variants, std::ostream& out,
               std::ostream& err);

int cmd_synth(const SyntheticConfig& config, const std::filesystem::path& dir, std::ostream& out,
              std::ostream& err);

int cmd_stats(const std::filesystem::path& data_dir, bool compact_ids, std::ostream& out, std::ostream& err);

/// Writes incidence.tsv, projection.tsv and motif.tsv as coordinate lists.
int cmd_dump_hypergraph(const std::filesystem::path& data_dir, bool compact_ids,
                        const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

}  // namespace hhgr
