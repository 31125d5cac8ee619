#pragma once

#include "ifm/encoder.hpp"
#include "ifm/losses.hpp"
#include "ifm/synthdata.hpp"

#include <vector>

namespace ifm {

enum class Objective { infonce, ifm, combined };

struct TrainOptions {
  std::vector<int> hidden_dims = {64, 64};
  int embed_dim = 8;
  LossConfig loss;
  Objective objective = Objective::combined;
  AdamConfig adam;
  int steps = 3000;
  int negatives = 31;
  int pairs_per_step = 8;           // pointwise batches averaged per update
  std::vector<int> held_features;   // conditioned sampling when nonempty
  std::uint64_t seed = 1;
};

struct TrainResult {
  Encoder encoder;
  double mean_loss_last_10pct = 0.0;  // averaged objective over the final 10%
};

/// Trains a fresh MLP encoder on batches from the dataset spec. Fully
/// deterministic for a given (spec, options) pair: initialization, sampling,
/// and update order all derive from options.seed.
TrainResult train_encoder(const SyntheticDatasetSpec& spec,
                          const TrainOptions& opts);

}  // namespace ifm
