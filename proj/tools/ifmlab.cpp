#include "ifm/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

ifm::RunConfig load(const std::string& config_path,
                    const std::optional<std::uint64_t>& seed,
                    const std::optional<std::string>& out_dir) {
  ifm::RunConfig cfg = config_path.empty() ? ifm::RunConfig{}
                                           : ifm::load_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive learning laboratory: InfoNCE, implicit feature "
               "modification, and feature-suppression experiments on "
               "synthetic data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "Path to a JSON run config");
  app.add_option("--seed", seed, "Override config seed");
  app.add_option("--out", out_dir, "Override config output directory");

  auto* gen = app.add_subcommand("gen-data", "Export a labeled dataset as CSV");
  auto* train = app.add_subcommand("train", "Train an encoder and write metrics");
  auto* probe = app.add_subcommand("probe", "Evaluate a saved checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Run the config's hyperparameter grid");
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  auto* retrieve = app.add_subcommand("retrieve",
                                      "Nearest neighbours of a perturbed query");
  auto* robust =
      app.add_subcommand("robust-split", "Build the FGSM robust/non-robust split");
  auto* report = app.add_subcommand("report", "Summarize a metrics table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return ifm::cli::cmd_verify(std::cout);

    const ifm::RunConfig cfg = load(config_path, seed, out_dir);
    if (gen->parsed()) {
      std::cout << "wrote " << ifm::cli::cmd_gen_data(cfg) << "\n";
    } else if (train->parsed()) {
      const auto out = ifm::cli::cmd_train(cfg);
      std::cout << ifm::cli::metrics_header(cfg.data.n_features) << "\n"
                << out.metrics_row << "\n"
                << "checkpoint: " << out.checkpoint_path << "\n";
    } else if (probe->parsed()) {
      std::cout << ifm::cli::cmd_probe(cfg);
    } else if (sweep->parsed()) {
      const auto rows = ifm::cli::cmd_sweep(cfg, std::cout);
      std::cout << rows.size() << " rows in " << cfg.out_dir << "/sweep.csv\n";
    } else if (retrieve->parsed()) {
      std::cout << ifm::cli::cmd_retrieve(cfg);
    } else if (robust->parsed()) {
      std::cout << ifm::cli::cmd_robust_split(cfg);
    } else if (report->parsed()) {
      std::cout << ifm::cli::cmd_report(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
