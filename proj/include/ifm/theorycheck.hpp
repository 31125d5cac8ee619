#pragma once

#include "ifm/eval.hpp"
#include "ifm/training.hpp"

#include <vector>

namespace ifm {

enum class OracleMode { distinguish, suppress };

/// Encoder defined directly on continuous latent tuples: outputs the value of
/// one latent feature exactly (distinguish) or of a fixed other feature
/// (suppress). Both outputs are unit vectors by construction.
struct OracleEncoder {
  int target_feature = 0;
  int output_feature = 0;  // equals target in distinguish mode
  OracleMode mode = OracleMode::distinguish;

  Vector apply(const std::vector<Vector>& latents) const;
};

OracleEncoder build_oracle(int feature, OracleMode mode, int n_features);

/// log I0(1/tau): the uniformity loss of the uniform distribution on S^1.
double uniform_circle_unif(double tau);

struct CircleOptimumReport {
  LimitingLossEstimate supp;
  LimitingLossEstimate disc;
  double analytic_total = 0.0;   // 0 + log I0(1/tau)
  double collapse_unif = 0.0;    // measured on a constant encoder
  double collapse_expected = 0.0;  // 1/tau
  double probe_acc_supp = 0.0;   // feature-j probe, 8 angular bins
  double probe_acc_disc = 0.0;
  double probe_chance = 0.125;

  bool losses_indistinguishable = false;  // |supp - disc| <= 2 combined SE
  bool anchors_hold = false;              // both within 2 SE of analytic_total
  bool collapse_matches = false;          // |collapse_unif - 1/tau| <= 1e-6
  bool probes_separated = false;          // accuracy gap > 0.5
  bool passed() const;
};

struct CircleOptimumOptions {
  int n_mc = 20000;
  int pool_size = 4096;
  int probe_samples = 4000;
  int probe_bins = 8;
  double tau = 1.0;
};

/// Circle demonstration: the suppressing and distinguishing
/// oracle encoders reach statistically indistinguishable limiting losses at
/// the analytic optimum, while their feature probes differ drastically.
CircleOptimumReport circle_optimum_check(const CircleOptimumOptions& opts, SeededRng& rng);

struct ConditionedSuppressionReport {
  std::vector<int> held;
  std::vector<double> scores;  // suppression_score per feature
  double mean_held_score = 0.0;
  double mean_complement_score = 0.0;
  ProbeResult probe;
};

/// Conditioned-training demonstration: holding features S constant across batches
/// drives their suppression scores down while complement features stay
/// distinguishable. Finite training, so reports are consistent-with, not
/// proofs.
ConditionedSuppressionReport conditioned_suppression_check(const SyntheticDatasetSpec& spec,
                        const std::vector<int>& held,
                        const TrainOptions& train_opts,
                        const ReadoutOptions& readout_opts, SeededRng& rng);

}  // namespace ifm
