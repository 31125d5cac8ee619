#pragma once

#include "ifm/encoder.hpp"
#include "ifm/eval.hpp"
#include "ifm/losses.hpp"

#include <cstdint>
#include <vector>

namespace ifm {

struct MemoryBank {
  std::vector<Vector> embeddings;  // unit norm
  std::vector<std::int64_t> ids;   // parallel
};

struct ScoredId {
  std::int64_t id = 0;
  double similarity = 0.0;
};

/// Top-k bank entries by descending cosine similarity; ties broken by lowest
/// id. Nearest means maximum similarity.
std::vector<ScoredId> nn_retrieve(const MemoryBank& bank, const Vector& query,
                                  int k);

struct OracleOptions {
  int restarts = 5;
  int steps = 200;
  std::uint64_t seed = 0;  // restart initialization stream
};

/// Maximizes pointwise InfoNCE over joint perturbations (delta+, delta-_i)
/// inside their eps-balls by projected gradient ascent with random restarts.
/// The closed-form ifm_pointwise is the true maximum; the search comes within
/// 1e-4 of it and never exceeds it beyond rounding.
double eps_ball_oracle(const EmbeddingBatch& b, const LossConfig& cfg,
                       const OracleOptions& opts = {});

struct LabeledDataset {
  std::vector<Vector> inputs;
  std::vector<int> labels;
  int n_classes = 0;
};

struct RobustSplit {
  std::vector<Vector> adv_inputs;
  std::vector<int> true_labels;    // pairs with adv_inputs: the D_R view
  std::vector<int> target_labels;  // pairs with adv_inputs: the D_NR view
  std::vector<int> steps_taken;
  int dropped = 0;

  double mean_steps() const;
};

/// Repeated FGSM toward a uniformly drawn hallucinated target per sample:
/// x <- x - eps_step * sign(d loss(h(f(x)), t) / dx) until the probe predicts
/// t or max_steps is hit. Samples that never reach t are dropped and counted.
RobustSplit fgsm_split(const Encoder& enc, const LinearProbe& probe,
                       const LabeledDataset& data, double eps_step,
                       int max_steps, SeededRng& rng);

struct RefinetuneResult {
  double acc_original = 0.0;
  double acc_robust = 0.0;
  double acc_nonrobust = 0.0;
};

/// Trains fresh probes on the original data, D_R, and D_NR, and evaluates
/// each on clean test inputs.
RefinetuneResult refinetune_eval(const Encoder& enc, const LabeledDataset& train,
                                 const RobustSplit& split,
                                 const LabeledDataset& clean_test,
                                 const ProbeOptions& opts = {});

/// RobustSplit rows in the dataset format plus the hallucinated target column.
void write_robust_split(std::ostream& out, const RobustSplit& split);

}  // namespace ifm
