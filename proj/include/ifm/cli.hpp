#pragma once

#include "ifm/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ifm::cli {

/// Deterministic run identifier derived from the training hyperparameters.
std::string run_id(const RunConfig& cfg);

std::string metrics_header(int n_features);

struct TrainOutput {
  std::string run_id;
  std::string metrics_row;  // one CSV line, without the header
  std::string checkpoint_path;
  std::string metrics_path;
};

/// Trains per the config, writes the checkpoint and a single-row metrics file
/// under out_dir. Bitwise identical outputs for identical config and seed.
TrainOutput cmd_train(const RunConfig& cfg);

/// Writes out_dir/dataset.csv with the documented column order.
std::string cmd_gen_data(const RunConfig& cfg);

/// Loads a checkpoint (probe.checkpoint, or the run's own) and reports a
/// metrics row without retraining.
std::string cmd_probe(const RunConfig& cfg);

/// Cartesian product of the sweep grids x seeds; one metrics row per run,
/// appended to out_dir/sweep.csv. Existing rows are skipped, so interrupted
/// sweeps resume.
std::vector<std::string> cmd_sweep(const RunConfig& cfg, std::ostream& log);

/// Property suite: gradient checks, oracle equivalence, epsilon monotonicity,
/// symmetry, limiting-loss anchors, and the circle demonstration. Returns 0
/// only if every check passes.
int cmd_verify(std::ostream& out);

/// Per-feature mean and std across seeds plus loss/error correlations.
std::string cmd_report(const RunConfig& cfg);

/// Embeds a memory bank, perturbs one query toward/away from an anchor, and
/// prints the top-k neighbours per epsilon.
std::string cmd_retrieve(const RunConfig& cfg);

/// Builds the FGSM robust/non-robust split for one feature, writes it under
/// out_dir, and prints the refinetuned accuracies.
std::string cmd_robust_split(const RunConfig& cfg);

}  // namespace ifm::cli
