#pragma once

#include "ifm/eval.hpp"
#include "ifm/synthdata.hpp"
#include "ifm/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ifm {

struct SweepGrid {
  std::vector<double> tau = {0.5};
  std::vector<double> beta = {0.0};
  std::vector<double> eps = {0.0};
  std::vector<double> alpha = {1.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct GenDataConfig {
  int n_samples = 1000;
  bool augment = true;
};

struct RetrieveConfig {
  int bank_samples = 512;
  int query_index = 0;
  int anchor_index = 1;
  double eps = 0.1;
  int k = 5;
  std::string checkpoint;  // empty: derived from out_dir and run id
};

struct RobustSplitConfig {
  int feature = 0;
  double eps_step = 0.01;
  int max_steps = 50;
  int n_samples = 1000;
  std::string checkpoint;
};

struct ProbeCmdConfig {
  std::string checkpoint;
};

struct ReportConfig {
  std::string metrics;  // empty: out_dir/sweep.csv
};

/// Experiment configuration: a versioned key tree. Unknown keys are parse
/// errors so hyperparameter typos cannot pass silently.
struct RunConfig {
  int version = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  SyntheticDatasetSpec data;
  TrainOptions train;  // loss, objective, optimizer, schedule, architecture
  ReadoutOptions eval;
  SweepGrid sweep;
  GenDataConfig gen_data;
  RetrieveConfig retrieve;
  RobustSplitConfig robust_split;
  ProbeCmdConfig probe;
  ReportConfig report;

  void validate() const;
};

RunConfig parse_config(const std::string& json_text);
std::string serialize_config(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);

const char* objective_name(Objective o);
const char* variant_name(LossVariant v);

}  // namespace ifm
