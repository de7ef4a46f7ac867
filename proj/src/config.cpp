#include "hhgr/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hhgr/error.hpp"

namespace hhgr {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  s = s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("config: " + key + " = '" + value + "': expected " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    bad_value(key, value, std::is_integral_v<T> ? "a non-negative integer" : "a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string join_ks(const std::vector<std::size_t>& ks) {
  std::string out;
  for (std::size_t k = 0; k < ks.size(); ++k) out += (k ? "," : "") + std::to_string(ks[k]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(std::string key, T RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

template <typename T>
Field train_number(std::string key, T TrainConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.train.*member = parse_number<T>(key, v); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.train.*member);
            else return std::to_string(c.train.*member);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      {"run.name", [](RunConfig& c, const std::string& v) {
         if (v.empty() || v.find('/') != std::string::npos) bad_value("run.name", v, "a non-empty name without '/'");
         c.name = v;
       },
       [](const RunConfig& c) { return c.name; }},
      {"run.output_root", [](RunConfig& c, const std::string& v) { c.output_root = v; },
       [](const RunConfig& c) { return c.output_root.string(); }},
      {"run.mode", [](RunConfig& c, const std::string& v) { c.train.mode = parse_mode(v); },
       [](const RunConfig& c) { return std::string(mode_name(c.train.mode)); }},
      train_number("run.seed", &TrainConfig::seed),
      train_number("run.threads", &TrainConfig::threads),
      {"data.dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir.string(); }},
      {"data.compact_ids", [](RunConfig& c, const std::string& v) { c.compact_ids = parse_bool("data.compact_ids", v); },
       [](const RunConfig& c) { return std::string(c.compact_ids ? "true" : "false"); }},
      size_field("data.split_seed", &RunConfig::split_seed),
      train_number("model.dim", &TrainConfig::dim),
      train_number("model.user_layers", &TrainConfig::user_layers),
      train_number("model.group_layers", &TrainConfig::group_layers),
      train_number("train.batch_size", &TrainConfig::batch_size),
      train_number("train.negatives", &TrainConfig::negatives),
      train_number("train.lr", &TrainConfig::lr),
      train_number("train.lr_group", &TrainConfig::lr_group),
      train_number("train.pretrain_epochs", &TrainConfig::pretrain_epochs),
      train_number("train.epochs", &TrainConfig::epochs),
      train_number("train.patience", &TrainConfig::patience),
      train_number("train.densify_threshold", &TrainConfig::densify_threshold),
      train_number("ssl.coarse_rate", &TrainConfig::coarse_rate),
      train_number("ssl.fine_rate", &TrainConfig::fine_rate),
      train_number("ssl.beta", &TrainConfig::beta),
      train_number("ssl.negatives", &TrainConfig::contrast_negatives),
      {"eval.ks", [](RunConfig& c, const std::string& v) { c.eval.ks = parse_ks(v); },
       [](const RunConfig& c) { return join_ks(c.eval.ks); }},
      {"eval.recall_denominator",
       [](RunConfig& c, const std::string& v) {
         c.eval.denominator = parse_recall_denominator(v);
         c.train.recall_denominator = c.eval.denominator;
       },
       [](const RunConfig& c) { return std::string(recall_denominator_name(c.eval.denominator)); }},
      train_number("eval.validation_k", &TrainConfig::validation_k),
      size_field("eval.buckets", &RunConfig::buckets),
  };
  return all;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void finish(RunConfig& c) {
  c.eval.threads = c.train.threads;
  c.train.validate();
  if (c.buckets < 1) throw ConfigError("config: eval.buckets must be >= 1");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  find_field(key).set(config, trim(value));
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    const auto k = parse_number<std::size_t>("eval.ks", part);
    if (k < 1) bad_value("eval.ks", text, "positive integers");
    ks.push_back(k);
  }
  if (ks.empty()) bad_value("eval.ks", text, "a comma-separated list of positive integers");
  return ks;
}

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) throw ConfigError("config: " + origin + ": key '" + section + "' is outside any section");
    for (const auto& [key, value] : entries) apply_setting(config, section + "." + key, value.data());
  }
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  finish(config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string(), overrides);
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv("HHGR_SEED"); seed && *seed) {
    const auto value = parse_number<std::uint64_t>("HHGR_SEED", seed);
    config.train.seed = value;
    config.split_seed = value;
  }
  if (const char* threads = std::getenv("HHGR_THREADS"); threads && *threads) {
    const auto cap = parse_number<std::size_t>("HHGR_THREADS", threads);
    if (cap < 1) bad_value("HHGR_THREADS", threads, "a positive integer");
    config.train.threads = std::min(config.train.threads, cap);
  }
  finish(config);
}

std::string echo_config(const RunConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const auto sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
  return os.str();
}

nlohmann::json hyperparameters_json(const RunConfig& config) {
  nlohmann::json j;
  for (const auto& f : fields()) j[f.key] = f.get(config);
  return j;
}

}  // namespace hhgr
