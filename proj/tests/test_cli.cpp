#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hhgr/checkpoint.hpp"
#include "hhgr/commands.hpp"
#include "hhgr/error.hpp"
#include "support.hpp"

using namespace hhgr;

namespace {

std::filesystem::path synth_dir(const std::string& name, std::size_t users = 30) {
  SyntheticConfig c;
  c.num_users = users;
  c.num_items = 40;
  c.num_groups = 20;
  c.max_group_size = 4;
  c.seed = 2;
  const auto dir = testing::scratch_dir(name);
  std::ostringstream out, err;
  REQUIRE(cmd_synth(c, dir, out, err) == kExitOk);
  return dir;
}

RunConfig quick_run(const std::filesystem::path& data, const std::filesystem::path& root) {
  return parse_config("[run]\nname = quick\nmode = S2\n[model]\ndim = 8\n[train]\nepochs = 3\npretrain_epochs = 1\n"
                      "batch_size = 64\nnegatives = 2\n[ssl]\nnegatives = 3\n",
                      "<test>", {{"data.dir", data.string()}, {"run.output_root", root.string()}});
}

int run_cli(const std::string& args) {
  const std::string command = std::string(HHGR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config files layer over defaults and command-line overrides win") {
  const auto c = parse_config("[train]\nlr = 0.01\nepochs = 7\n[eval]\nks = 5,10\n", "<t>", {{"train.epochs", "9"}});
  CHECK(c.train.lr == 0.01);
  CHECK(c.train.epochs == 9);
  CHECK(c.eval.ks == std::vector<std::size_t>{5, 10});
  CHECK(c.train.lr_group == 1e-4);
  CHECK(c.train.batch_size == 512);
}

TEST_CASE("unknown or malformed keys are configuration errors") {
  try {
    parse_config("[train]\nfoo = 1\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.foo") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[train]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nmode = HHGR-z\n"), ConfigError);
}

TEST_CASE("echoed config parses back to the same settings") {
  auto c = parse_config("[run]\nname = echo\nmode = HHGR-F\n[ssl]\nbeta = 0.25\ncoarse_rate = 0.1\n[eval]\nks = 3,7\n"
                        "recall_denominator = full\n");
  const auto text = echo_config(c);
  const auto back = parse_config(text);
  CHECK(echo_config(back) == text);
  CHECK(back.train.mode == Mode::FineOnly);
  CHECK(back.train.beta == 0.25);
  CHECK(back.eval.denominator == RecallDenominator::Full);
  for (const auto& key : config_keys()) CHECK(text.find(key.substr(key.find('.') + 1)) != std::string::npos);
}

TEST_CASE("environment seeds and thread cap") {
  auto c = parse_config("[run]\nthreads = 8\n");
  setenv("HHGR_SEED", "99", 1);
  setenv("HHGR_THREADS", "2", 1);
  apply_environment(c);
  unsetenv("HHGR_SEED");
  unsetenv("HHGR_THREADS");
  CHECK(c.train.seed == 99);
  CHECK(c.split_seed == 99);
  CHECK(c.train.threads == 2);
}

TEST_CASE("checkpoint round trip keeps float32 values") {
  const ModelShape shape{6, 2, 1, 5, 7, 3};
  const auto p = ModelParams::initialize(shape, 4);
  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "m.bin", p, shape);
  const auto ck = load_checkpoint(dir / "m.bin");
  CHECK(ck.shape == shape);
  const auto a = p.tensors();
  const auto b = ck.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(*b[k] == a[k]->cast<float>().cast<double>());
  }
  const auto bytes = std::filesystem::file_size(dir / "m.bin");
  std::size_t floats = 0;
  for (const auto* t : a) floats += static_cast<std::size_t>(t->size());
  CHECK(bytes == 8 + 4 + 6 * 8 + 4 * floats);
}

TEST_CASE("damaged or mismatched checkpoints are rejected") {
  const ModelShape shape{4, 1, 1, 5, 7, 3};
  const auto dir = testing::scratch_dir("ckpt-bad");
  save_checkpoint(dir / "m.bin", ModelParams::initialize(shape, 1), shape);
  std::filesystem::resize_file(dir / "m.bin", std::filesystem::file_size(dir / "m.bin") - 4);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.bin"), ValidationError);
  std::ofstream(dir / "junk.bin") << "not a checkpoint at all";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), ValidationError);

  InteractionDataset ds;
  ds.num_users = 6;
  ds.num_items = 7;
  ds.num_groups = 3;
  try {
    require_compatible(shape, ds);
    FAIL("expected a mismatch");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("users=5") != std::string::npos);
    CHECK(what.find("users=6") != std::string::npos);
  }
}

TEST_CASE("train writes every artifact and evaluate reads them back") {
  const auto data = synth_dir("cli-data");
  const auto root = testing::scratch_dir("cli-out");
  std::ostringstream out, err;
  REQUIRE(cmd_train(quick_run(data, root), out, err) == kExitOk);
  const auto dir = root / "quick";
  for (const char* f : {"config.echo", "train_log.jsonl", "checkpoint.bin", "checkpoint.json", "metrics.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("l_uu"));
    ++lines;
  }
  CHECK(lines == 4);

  EvaluateOptions eo;
  eo.checkpoint = dir / "checkpoint.bin";
  eo.data_dir = data;
  eo.ks = {5, 10};
  eo.output = dir / "eval.json";
  std::ostringstream eout, eerr;
  REQUIRE(cmd_evaluate(eo, eout, eerr) == kExitOk);
  std::ifstream in(eo.output);
  const auto j = nlohmann::json::parse(in);
  CHECK(j["metrics"].size() == 4);
  CHECK(j["metrics"].contains("NDCG@5"));
  CHECK(j["metrics"].contains("Recall@10"));
  CHECK(j["mode"] == "S2");

  std::ifstream train_metrics(dir / "metrics.json");
  CHECK(nlohmann::json::parse(train_metrics)["metrics"].contains("NDCG@20"));
}

TEST_CASE("evaluating against a dataset of another size fails with both shapes") {
  const auto data = synth_dir("cli-small");
  const auto other = synth_dir("cli-large", 45);
  const auto root = testing::scratch_dir("cli-mismatch");
  std::ostringstream out, err;
  REQUIRE(cmd_train(quick_run(data, root), out, err) == kExitOk);
  EvaluateOptions eo;
  eo.checkpoint = root / "quick" / "checkpoint.bin";
  eo.data_dir = other;
  std::ostringstream eout, eerr;
  CHECK(cmd_evaluate(eo, eout, eerr) == kExitUsage);
  CHECK(eerr.str().find("users=30") != std::string::npos);
  CHECK(eerr.str().find("users=45") != std::string::npos);
}

TEST_CASE("ablation prints one row per variant") {
  const auto data = synth_dir("cli-ablate");
  const auto root = testing::scratch_dir("cli-ablate-out");
  std::ostringstream out, err;
  REQUIRE(cmd_ablate(quick_run(data, root), {"HHGR-wu", "HHGR-wg", "HHGR"}, out, err) == kExitOk);
  const auto table = out.str();
  for (const char* v : {"HHGR-wu", "HHGR-wg"}) CHECK(table.find(v) != std::string::npos);
  CHECK(table.find("@50") != std::string::npos);
  std::ifstream in(root / "quick" / "ablation.json");
  CHECK(nlohmann::json::parse(in).size() == 3);
  std::ostringstream o2, e2;
  CHECK(cmd_ablate(quick_run(data, root), {"HHGR-q"}, o2, e2) == kExitUsage);
}

TEST_CASE("dump-hypergraph and stats") {
  const auto data = synth_dir("cli-dump");
  const auto out_dir = testing::scratch_dir("cli-dump-out");
  std::ostringstream out, err;
  CHECK(cmd_dump_hypergraph(data, false, out_dir, out, err) == kExitOk);
  for (const char* f : {"incidence.tsv", "projection.tsv", "motif.tsv"}) CHECK(std::filesystem::exists(out_dir / f));
  std::ostringstream sout;
  CHECK(cmd_stats(data, false, sout, err) == kExitOk);
  CHECK(sout.str().find("30") != std::string::npos);
}

TEST_CASE("binary exit codes") {
  const auto data = synth_dir("cli-exit");
  const auto root = testing::scratch_dir("cli-exit-out");
  const std::string base = "train --set data.dir=" + data.string() + " --set run.output_root=" + root.string() +
                           " --set model.dim=4 --set train.epochs=1 --set train.pretrain_epochs=0";
  CHECK(run_cli(base) == 0);
  CHECK(std::filesystem::exists(root / "run" / "checkpoint.bin"));
  CHECK(run_cli(base + " --set foo=1") == 2);
  CHECK(run_cli("train --set data.dir=" + (root / "missing").string()) == 2);
  CHECK(run_cli("synth --out " + (root / "s").string() + " --density 0") == 2);
  CHECK(run_cli("ablate --variants HHGR-q --set data.dir=" + data.string()) == 2);
  CHECK(run_cli("no-such-command") == 2);
}
