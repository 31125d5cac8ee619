#pragma once

#include "ifm/numerics.hpp"

#include <iosfwd>
#include <vector>

namespace ifm {

/// Generative model with n discrete latent features, an injective code map,
/// and a stochastic augmentation law. Stands in for image datasets at desk
/// scale: each feature value owns a fixed code vector, scaled by a per-feature
/// salience; augmentations resample the nuisance block and jitter the feature
/// blocks.
struct SyntheticDatasetSpec {
  int n_features = 3;
  std::vector<int> cardinalities = {10, 10, 10};
  std::vector<double> saliences = {3.0, 1.0, 0.7};
  int code_dim = 8;
  int nuisance_dim = 8;
  double identity_aug_prob = 0.2;  // must stay > 0
  double jitter_sigma = 0.05;
  std::uint64_t seed = 1;

  int input_dim() const { return n_features * code_dim + nuisance_dim; }
  void validate() const;

  /// Three features, ten values each, saliences 3.0 / 1.0 / 0.7.
  static SyntheticDatasetSpec trifeature();
  /// Two features with a strong easy/hard salience skew (4.0 vs 1.0).
  static SyntheticDatasetSpec two_feature_skew();
};

struct LatentSample {
  std::vector<int> values;  // values[j] in [0, c_j)
};

/// Per-feature codebooks: codes[j][v] is the unit code vector of value v.
struct Codebooks {
  std::vector<std::vector<Vector>> codes;
};

struct ContrastiveBatch {
  Vector anchor;
  Vector positive;
  std::vector<Vector> negatives;
  LatentSample anchor_latent;  // shared by the positive
  std::vector<LatentSample> negative_latents;
  bool degenerate_discrimination = false;  // conditioning held every feature
};

/// Distinct unit codes per feature, drawn once from spec.seed; min pairwise
/// distance within a feature is kept above 1e-3 by redraw.
Codebooks make_codes(const SyntheticDatasetSpec& spec);

LatentSample sample_latent(const SyntheticDatasetSpec& spec, SeededRng& rng);

/// x = a(g(z)): scaled feature codes plus nuisance block, then either the
/// identity augmentation (probability p_id: nuisance zeroed, no jitter) or
/// resampled nuisance with Gaussian jitter on the feature blocks.
Vector render(const SyntheticDatasetSpec& spec, const Codebooks& codes,
              const LatentSample& z, SeededRng& rng);

/// g(z) with the identity augmentation; deterministic in z.
Vector render_identity(const SyntheticDatasetSpec& spec, const Codebooks& codes,
                       const LatentSample& z);

/// Anchor and positive share one latent draw with independent augmentations;
/// each negative gets an independent latent and augmentation.
ContrastiveBatch sample_batch(const SyntheticDatasetSpec& spec,
                              const Codebooks& codes, int m, SeededRng& rng);

/// Like sample_batch but every sample in the batch shares one value draw on
/// the features in `held`; features outside `held` stay independent.
ContrastiveBatch sample_conditioned_batch(const SyntheticDatasetSpec& spec,
                                          const Codebooks& codes, int m,
                                          const std::vector<int>& held,
                                          SeededRng& rng);

struct ProbeDataset {
  std::vector<Vector> inputs;
  std::vector<LatentSample> latents;

  int label(int i, int feature) const { return latents[i].values[feature]; }
};

/// I.i.d. latent draws rendered with (or without) augmentation; labels are
/// the latent feature values.
ProbeDataset probe_dataset(const SyntheticDatasetSpec& spec,
                           const Codebooks& codes, int n_samples,
                           SeededRng& rng, bool augment = true);

/// One draw of a continuous latent: uniform on the unit sphere S^{d-1}, d >= 2.
Vector sphere_latents(int d, SeededRng& rng);

/// Rows "x0,...,x{D-1},f0,...,f{n-1}" after a header naming the dimensions.
void write_dataset(std::ostream& out, const SyntheticDatasetSpec& spec,
                   const std::vector<Vector>& inputs,
                   const std::vector<LatentSample>& latents);

}  // namespace ifm
