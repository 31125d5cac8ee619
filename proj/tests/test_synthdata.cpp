#include "ifm/synthdata.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

using namespace ifm;

TEST_CASE("spec validation") {
  SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.input_dim() == 32);

  spec.cardinalities = {10, 10};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = SyntheticDatasetSpec::trifeature();
  spec.identity_aug_prob = 0.0;  // must stay > 0
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = SyntheticDatasetSpec::two_feature_skew();
  CHECK(spec.n_features == 2);
  CHECK(spec.saliences[0] == 4.0);
  CHECK(spec.saliences[1] == 1.0);
}

TEST_CASE("make_codes: distinct unit codes, deterministic in spec seed") {
  SyntheticDatasetSpec spec;
  spec.n_features = 1;
  spec.cardinalities = {2};
  spec.saliences = {1.0};
  spec.code_dim = 2;
  const Codebooks a = make_codes(spec);
  CHECK(a.codes[0].size() == 2);
  CHECK(std::abs(norm(a.codes[0][0]) - 1.0) <= 1e-12);
  CHECK(norm(Vector(a.codes[0][0] - a.codes[0][1])) > 1e-3);

  const Codebooks b = make_codes(spec);
  CHECK(a.codes[0][0] == b.codes[0][0]);
  CHECK(a.codes[0][1] == b.codes[0][1]);

  // Min pairwise distance across seeds.
  SyntheticDatasetSpec tri = SyntheticDatasetSpec::trifeature();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    tri.seed = seed;
    const Codebooks books = make_codes(tri);
    for (const auto& feature : books.codes)
      for (std::size_t i = 0; i < feature.size(); ++i)
        for (std::size_t j = i + 1; j < feature.size(); ++j)
          CHECK(norm(Vector(feature[i] - feature[j])) > 1e-3);
  }
}

TEST_CASE("render: deterministic when noiseless, block structure otherwise") {
  SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  spec.jitter_sigma = 0.0;
  spec.nuisance_dim = 0;
  spec.identity_aug_prob = 1.0;
  const Codebooks codes = make_codes(spec);
  SeededRng rng(1);
  const LatentSample z = sample_latent(spec, rng);
  const Vector a = render(spec, codes, z, rng);
  const Vector b = render(spec, codes, z, rng);
  CHECK(a == b);

  // With jitter off, augmented renders differ only in the nuisance block.
  SyntheticDatasetSpec noisy = SyntheticDatasetSpec::trifeature();
  noisy.jitter_sigma = 0.0;
  const Codebooks codes2 = make_codes(noisy);
  SeededRng rng2(2);
  const LatentSample z2 = sample_latent(noisy, rng2);
  const Vector r1 = render(noisy, codes2, z2, rng2);
  const Vector r2 = render(noisy, codes2, z2, rng2);
  const int feature_dims = noisy.n_features * noisy.code_dim;
  for (int i = 0; i < feature_dims; ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("render: injectivity over all latents at zero noise") {
  SyntheticDatasetSpec spec;
  spec.n_features = 2;
  spec.cardinalities = {3, 3};
  spec.saliences = {1.0, 1.0};
  spec.code_dim = 4;
  spec.nuisance_dim = 0;
  spec.jitter_sigma = 0.0;
  spec.identity_aug_prob = 1.0;
  const Codebooks codes = make_codes(spec);

  std::vector<Vector> renders;
  for (int v0 = 0; v0 < 3; ++v0)
    for (int v1 = 0; v1 < 3; ++v1) {
      LatentSample z;
      z.values = {v0, v1};
      renders.push_back(render_identity(spec, codes, z));
    }
  for (std::size_t i = 0; i < renders.size(); ++i)
    for (std::size_t j = i + 1; j < renders.size(); ++j)
      CHECK(norm(Vector(renders[i] - renders[j])) > 1e-6);
}

TEST_CASE("sample_batch: positive pair shares the latent, negatives independent") {
  const SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  const Codebooks codes = make_codes(spec);
  SeededRng rng(3);
  for (int t = 0; t < 50; ++t) {
    const ContrastiveBatch batch = sample_batch(spec, codes, 4, rng);
    CHECK(batch.negatives.size() == 4);
    CHECK_FALSE(batch.degenerate_discrimination);
  }

  // Anchor and positive come from one latent: with jitter off their feature
  // blocks agree exactly, whatever the augmentations drew.
  SyntheticDatasetSpec no_jitter = spec;
  no_jitter.jitter_sigma = 0.0;
  const Codebooks nj_codes = make_codes(no_jitter);
  SeededRng nj_rng(17);
  for (int t = 0; t < 20; ++t) {
    const ContrastiveBatch b = sample_batch(no_jitter, nj_codes, 2, nj_rng);
    const int fdims = no_jitter.n_features * no_jitter.code_dim;
    for (int i = 0; i < fdims; ++i) CHECK(b.anchor[i] == b.positive[i]);
  }

  SeededRng r1(9), r2(9);
  const ContrastiveBatch b1 = sample_batch(spec, codes, 3, r1);
  const ContrastiveBatch b2 = sample_batch(spec, codes, 3, r2);
  CHECK(b1.anchor == b2.anchor);
  CHECK(b1.positive == b2.positive);
  for (int i = 0; i < 3; ++i) CHECK(b1.negatives[i] == b2.negatives[i]);

  // Collision probability of two independent negatives sharing every feature
  // is 1/1000; Monte Carlo rate within 3 sigma.
  SeededRng mc(4);
  const int trials = 100000;
  int collisions = 0;
  for (int t = 0; t < trials; ++t) {
    const LatentSample a = sample_latent(spec, mc);
    const LatentSample b = sample_latent(spec, mc);
    if (a.values == b.values) ++collisions;
  }
  const double rate = static_cast<double>(collisions) / trials;
  const double sigma = std::sqrt(0.001 * 0.999 / trials);
  CHECK(std::abs(rate - 0.001) <= 3.0 * sigma);
}

TEST_CASE("sample_conditioned_batch") {
  const SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  const Codebooks codes = make_codes(spec);

  SeededRng rng(5);
  for (int t = 0; t < 30; ++t) {
    const ContrastiveBatch b = sample_conditioned_batch(spec, codes, 5, {0}, rng);
    const int held_value = b.anchor_latent.values[0];
    for (const auto& z : b.negative_latents) CHECK(z.values[0] == held_value);
    CHECK_FALSE(b.degenerate_discrimination);
  }

  // Empty S reduces to sample_batch (identical draw stream).
  SeededRng ra(6), rb(6);
  const ContrastiveBatch a = sample_conditioned_batch(spec, codes, 3, {}, ra);
  const ContrastiveBatch b = sample_batch(spec, codes, 3, rb);
  CHECK(a.anchor == b.anchor);
  CHECK(a.negatives[1] == b.negatives[1]);

  // Holding every feature is allowed but flagged.
  SeededRng rc(7);
  const ContrastiveBatch full =
      sample_conditioned_batch(spec, codes, 2, {0, 1, 2}, rc);
  CHECK(full.degenerate_discrimination);
  for (const auto& z : full.negative_latents)
    CHECK(z.values == full.anchor_latent.values);

  CHECK_THROWS_AS(sample_conditioned_batch(spec, codes, 2, {3}, rc),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_conditioned_batch(spec, codes, 0, {}, rc),
                  std::invalid_argument);
}

TEST_CASE("probe_dataset: uniform marginals, determinism, oracle recovery") {
  const SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  const Codebooks codes = make_codes(spec);

  SeededRng rng(8);
  const ProbeDataset ds = probe_dataset(spec, codes, 10000, rng);
  for (int j = 0; j < spec.n_features; ++j) {
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 10000; ++i) ++counts[ds.label(i, j)];
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    CHECK(chi2 < 35.0);  // chi^2 with 9 dof, far beyond the 0.1% tail
  }

  SeededRng r1(9), r2(9);
  const ProbeDataset d1 = probe_dataset(spec, codes, 50, r1);
  const ProbeDataset d2 = probe_dataset(spec, codes, 50, r2);
  for (int i = 0; i < 50; ++i) CHECK(d1.inputs[i] == d2.inputs[i]);

  // Zero jitter: a nearest-code reading of each feature block recovers the
  // label exactly.
  SyntheticDatasetSpec clean = SyntheticDatasetSpec::trifeature();
  clean.jitter_sigma = 0.0;
  const Codebooks ccodes = make_codes(clean);
  SeededRng r3(10);
  const ProbeDataset cds = probe_dataset(clean, ccodes, 500, r3);
  for (int i = 0; i < 500; ++i)
    for (int j = 0; j < clean.n_features; ++j) {
      const Vector block =
          cds.inputs[i].segment(j * clean.code_dim, clean.code_dim) /
          clean.saliences[j];
      int best = -1;
      double best_dot = -1e300;
      for (int v = 0; v < clean.cardinalities[j]; ++v) {
        const double d = dot(block, ccodes.codes[j][v]);
        if (d > best_dot) {
          best_dot = d;
          best = v;
        }
      }
      CHECK(best == cds.label(i, j));
    }
}

TEST_CASE("sphere_latents: moments and validity") {
  SeededRng rng(11);
  Vector mean = Vector::Zero(3);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vector z = sphere_latents(3, rng);
    CHECK(std::abs(norm(z) - 1.0) <= 1e-12);
    mean += z;
  }
  mean /= n;
  CHECK(norm(mean) < 3.0 / std::sqrt(static_cast<double>(n)));

  // d=2: angle histogram roughly uniform.
  SeededRng rng2(12);
  std::vector<int> bins(16, 0);
  for (int i = 0; i < 16000; ++i) {
    const Vector z = sphere_latents(2, rng2);
    const double a = std::atan2(z[1], z[0]) + 3.14159265358979323846;
    int b = static_cast<int>(a / (2.0 * 3.14159265358979323846) * 16.0);
    ++bins[std::min(b, 15)];
  }
  double chi2 = 0.0;
  for (int c : bins) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(chi2 < 45.0);

  CHECK_THROWS_AS(sphere_latents(1, rng), std::invalid_argument);
}

TEST_CASE("write_dataset format") {
  SyntheticDatasetSpec spec;
  spec.n_features = 2;
  spec.cardinalities = {2, 3};
  spec.saliences = {1.0, 1.0};
  spec.code_dim = 2;
  spec.nuisance_dim = 1;
  const Codebooks codes = make_codes(spec);
  SeededRng rng(13);
  const ProbeDataset ds = probe_dataset(spec, codes, 3, rng);

  std::ostringstream out;
  write_dataset(out, spec, ds.inputs, ds.latents);
  const std::string text = out.str();
  CHECK(text.find("# input_dim=5 n_features=2") != std::string::npos);
  CHECK(text.find("x0,x1,x2,x3,x4,f0,f1") != std::string::npos);
  int lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == 5);  // header comment + column header + 3 rows
}
