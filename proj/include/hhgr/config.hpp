#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hhgr/data.hpp"
#include "hhgr/eval.hpp"
#include "hhgr/train.hpp"

namespace hhgr {

/// Everything a `train` or `ablate` run needs. Built-in defaults, then the
/// config file, then command-line overrides.
struct RunConfig {
  std::string name = "run";
  std::filesystem::path output_root = "out";
  std::filesystem::path data_dir;
  bool compact_ids = false;
  std::uint64_t split_seed = 2021;
  TrainConfig train;
  EvalOptions eval;
  std::size_t buckets = 4;

  std::filesystem::path output_dir() const { return output_root / name; }
};

/// Keys are `section.key`; `keys()` lists every accepted one.
const std::vector<std::string>& config_keys();

/// Throws ConfigError for an unknown key or a value that does not parse.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// `[section]` headers with `key = value` lines; `#` and `;` start comment lines.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// HHGR_SEED replaces every seed; HHGR_THREADS caps the worker count.
void apply_environment(RunConfig& config);

/// Effective configuration in the file format; parse_config(echo_config(c)) == c.
std::string echo_config(const RunConfig& config);

nlohmann::json hyperparameters_json(const RunConfig& config);

std::vector<std::size_t> parse_ks(const std::string& text);

}  // namespace hhgr
