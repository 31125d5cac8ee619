#include "ifm/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace ifm;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ifm_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// Small enough to train in well under a second.
RunConfig tiny_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.out_dir = out_dir;
  cfg.data = SyntheticDatasetSpec::two_feature_skew();
  cfg.train.hidden_dims = {16};
  cfg.train.embed_dim = 4;
  cfg.train.steps = 40;
  cfg.train.negatives = 4;
  cfg.train.pairs_per_step = 2;
  cfg.eval.n_samples = 300;
  cfg.eval.eval_batches = 10;
  cfg.eval.eval_negatives = 8;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: parse/serialize round trip preserves values") {
  const std::string text = R"({
    "version": 1,
    "seed": 11,
    "out_dir": "somewhere",
    "data": { "preset": "two_feature_skew", "jitter_sigma": 0.25 },
    "encoder": { "hidden": [32, 16], "embed_dim": 6 },
    "loss": { "tau": 0.2, "eps": 0.15, "alpha": 0.5, "beta": 0.0 },
    "objective": "combined",
    "train": { "steps": 123, "negatives": 9, "pairs_per_step": 3 },
    "eval": { "probe_samples": 512, "augment": false }
  })";
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.seed == 11);
  CHECK(cfg.data.n_features == 2);
  CHECK(cfg.data.jitter_sigma == 0.25);
  CHECK(cfg.train.loss.tau == 0.2);
  CHECK(cfg.train.loss.eps_pos == 0.15);
  CHECK(cfg.train.loss.eps_neg == std::vector<double>{0.15});
  CHECK(cfg.train.steps == 123);
  CHECK_FALSE(cfg.eval.augment);

  const std::string canon = serialize_config(cfg);
  const RunConfig two = parse_config(canon);
  CHECK(serialize_config(two) == canon);
}

TEST_CASE("config: strict key and value checking") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"verison": 1})"),
                       doctest::Contains("unknown key 'verison'"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"loss": {"temperture": 0.5}})"),
                       doctest::Contains("temperture"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"version": 2})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"objective": "sgd"})"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config(R"({"loss": {"eps": 0.1, "eps_pos": 0.2}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"loss": {"tau": -1}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("not json"), std::invalid_argument);

  // Validation errors name the offending field.
  CHECK_THROWS_WITH_AS(parse_config(R"({"train": {"steps": 0}})"),
                       doctest::Contains("train.steps"), std::invalid_argument);
}

TEST_CASE("cmd_train: bitwise identical outputs for identical config+seed") {
  const std::string dir = fresh_dir("train");
  const RunConfig cfg = tiny_config(dir);

  const cli::TrainOutput a = cli::cmd_train(cfg);
  const std::string ckpt_a = read_file(a.checkpoint_path);
  const std::string metrics_a = read_file(a.metrics_path);

  const cli::TrainOutput b = cli::cmd_train(cfg);
  CHECK(a.metrics_row == b.metrics_row);
  CHECK(read_file(b.checkpoint_path) == ckpt_a);
  CHECK(read_file(b.metrics_path) == metrics_a);

  // A different seed changes the row.
  RunConfig other = cfg;
  other.seed = 8;
  CHECK(cli::cmd_train(other).metrics_row != a.metrics_row);
}

TEST_CASE("cmd_probe reproduces the training row from the checkpoint") {
  const std::string dir = fresh_dir("probe");
  const RunConfig cfg = tiny_config(dir);
  const cli::TrainOutput out = cli::cmd_train(cfg);
  const std::string probe_text = cli::cmd_probe(cfg);
  CHECK(probe_text.find(out.metrics_row) != std::string::npos);
}

TEST_CASE("cmd_sweep: grid size and resume") {
  const std::string dir = fresh_dir("sweep");
  RunConfig cfg = tiny_config(dir);
  cfg.sweep.tau = {0.1, 1.0};
  cfg.sweep.beta = {0.0};
  cfg.sweep.eps = {0.0};
  cfg.sweep.alpha = {1.0};
  cfg.sweep.seeds = {1, 2, 3};

  std::ostringstream log;
  const auto rows = cli::cmd_sweep(cfg, log);
  CHECK(rows.size() == 6);
  const std::string sweep_file = read_file(dir + "/sweep.csv");

  // Rerun: every run is skipped, file identical.
  std::ostringstream log2;
  const auto rows2 = cli::cmd_sweep(cfg, log2);
  CHECK(rows2 == rows);
  CHECK(read_file(dir + "/sweep.csv") == sweep_file);
  CHECK(log2.str().find("skip") != std::string::npos);
  CHECK(log2.str().find("run ") == std::string::npos);

  // Report over the sweep output.
  RunConfig rep = cfg;
  const std::string report = cli::cmd_report(rep);
  CHECK(report.find("tau=0.1") != std::string::npos);
  CHECK(report.find("error/loss correlation") != std::string::npos);
}

TEST_CASE("cmd_gen_data writes the documented format") {
  const std::string dir = fresh_dir("gendata");
  RunConfig cfg = tiny_config(dir);
  cfg.gen_data.n_samples = 17;
  const std::string path = cli::cmd_gen_data(cfg);
  const std::string text = read_file(path);
  CHECK(text.find("# input_dim=24 n_features=2") != std::string::npos);
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 19);  // comment + header + 17 rows

  // Identical config produces identical bytes.
  CHECK(read_file(cli::cmd_gen_data(cfg)) == text);
}

TEST_CASE("cmd_retrieve and cmd_robust_split run end to end") {
  const std::string dir = fresh_dir("analysis");
  RunConfig cfg = tiny_config(dir);
  cfg.retrieve.bank_samples = 64;
  cfg.retrieve.k = 3;
  cfg.robust_split.n_samples = 120;
  cfg.robust_split.max_steps = 30;
  cli::cmd_train(cfg);

  const std::string retrieved = cli::cmd_retrieve(cfg);
  CHECK(retrieved.find("eps,rank,id,similarity") != std::string::npos);
  CHECK(cli::cmd_retrieve(cfg) == retrieved);

  const std::string split = cli::cmd_robust_split(cfg);
  CHECK(split.find("acc_original") != std::string::npos);
  CHECK(split.find("mean_steps") != std::string::npos);
  CHECK(fs::exists(dir + "/robust_split.csv"));
  CHECK(cli::cmd_robust_split(cfg) == split);
}

TEST_CASE("cmd_verify passes on a correct build") {
  std::ostringstream sink;
  CHECK(cli::cmd_verify(sink) == 0);
  CHECK(sink.str().find("FAIL") == std::string::npos);
}

TEST_CASE("missing files produce actionable errors") {
  RunConfig cfg = tiny_config(fresh_dir("missing"));
  CHECK_THROWS_AS(cli::cmd_probe(cfg), std::runtime_error);
  CHECK_THROWS_AS(cli::cmd_report(cfg), std::runtime_error);
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"),
                  std::runtime_error);
}

#ifdef IFMLAB_BIN
TEST_CASE("ifmlab binary: train subcommand round trip") {
  const std::string dir = fresh_dir("binary");
  const RunConfig cfg = tiny_config(dir);
  const std::string config_path = dir + "/config.json";
  std::ofstream(config_path) << serialize_config(cfg);

  const std::string cmd = std::string(IFMLAB_BIN) + " train --config " +
                          config_path + " > " + dir + "/stdout.txt 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const std::string stdout_text = read_file(dir + "/stdout.txt");
  CHECK(stdout_text.find("checkpoint:") != std::string::npos);

  // The in-process run and the binary agree row for row.
  const cli::TrainOutput direct = cli::cmd_train(cfg);
  CHECK(stdout_text.find(direct.metrics_row) != std::string::npos);

  const std::string bad = std::string(IFMLAB_BIN) + " train --config " + dir +
                          "/nope.json > /dev/null 2>&1";
  CHECK(std::system(bad.c_str()) != 0);
}
#endif
