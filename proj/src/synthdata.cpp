#include "ifm/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace ifm {

void SyntheticDatasetSpec::validate() const {
  if (n_features < 1)
    throw std::invalid_argument("dataset: n_features must be >= 1");
  if (static_cast<int>(cardinalities.size()) != n_features)
    throw std::invalid_argument("dataset: cardinalities must have n_features entries");
  if (static_cast<int>(saliences.size()) != n_features)
    throw std::invalid_argument("dataset: saliences must have n_features entries");
  for (int c : cardinalities)
    if (c < 2) throw std::invalid_argument("dataset: cardinalities must be >= 2");
  for (double s : saliences)
    if (!(s > 0.0)) throw std::invalid_argument("dataset: saliences must be > 0");
  if (code_dim < 1) throw std::invalid_argument("dataset: code_dim must be >= 1");
  if (nuisance_dim < 0)
    throw std::invalid_argument("dataset: nuisance_dim must be >= 0");
  if (!(identity_aug_prob > 0.0) || identity_aug_prob > 1.0)
    throw std::invalid_argument("dataset: identity_aug_prob must be in (0, 1]");
  if (jitter_sigma < 0.0)
    throw std::invalid_argument("dataset: jitter_sigma must be >= 0");
}

SyntheticDatasetSpec SyntheticDatasetSpec::trifeature() {
  return SyntheticDatasetSpec{};
}

SyntheticDatasetSpec SyntheticDatasetSpec::two_feature_skew() {
  SyntheticDatasetSpec spec;
  spec.n_features = 2;
  spec.cardinalities = {10, 10};
  spec.saliences = {4.0, 1.0};
  return spec;
}

Codebooks make_codes(const SyntheticDatasetSpec& spec) {
  spec.validate();
  SeededRng rng(spec.seed);
  Codebooks books;
  books.codes.resize(spec.n_features);
  for (int j = 0; j < spec.n_features; ++j) {
    auto& codes = books.codes[j];
    for (;;) {
      codes.clear();
      for (int v = 0; v < spec.cardinalities[j]; ++v)
        codes.push_back(sphere_vector(spec.code_dim, rng));
      double min_dist = 2.0;
      for (std::size_t a = 0; a < codes.size(); ++a)
        for (std::size_t b = a + 1; b < codes.size(); ++b)
          min_dist = std::min(min_dist, norm(Vector(codes[a] - codes[b])));
      if (codes.size() < 2 || min_dist > 1e-3) break;
    }
  }
  return books;
}

LatentSample sample_latent(const SyntheticDatasetSpec& spec, SeededRng& rng) {
  LatentSample z;
  z.values.resize(spec.n_features);
  for (int j = 0; j < spec.n_features; ++j)
    z.values[j] = static_cast<int>(
        rng.bounded(static_cast<std::uint64_t>(spec.cardinalities[j])));
  return z;
}

Vector render_identity(const SyntheticDatasetSpec& spec, const Codebooks& codes,
                       const LatentSample& z) {
  Vector x = Vector::Zero(spec.input_dim());
  for (int j = 0; j < spec.n_features; ++j) {
    const Vector& code = codes.codes[j][static_cast<std::size_t>(z.values[j])];
    x.segment(j * spec.code_dim, spec.code_dim) = spec.saliences[j] * code;
  }
  return x;
}

Vector render(const SyntheticDatasetSpec& spec, const Codebooks& codes,
              const LatentSample& z, SeededRng& rng) {
  Vector x = render_identity(spec, codes, z);
  const bool identity = rng.uniform() < spec.identity_aug_prob;
  if (identity) return x;
  for (int i = 0; i < spec.nuisance_dim; ++i)
    x[spec.n_features * spec.code_dim + i] = rng.uniform(-1.0, 1.0);
  if (spec.jitter_sigma > 0.0)
    for (int i = 0; i < spec.n_features * spec.code_dim; ++i)
      x[i] += spec.jitter_sigma * rng.normal();
  return x;
}

ContrastiveBatch sample_batch(const SyntheticDatasetSpec& spec,
                              const Codebooks& codes, int m, SeededRng& rng) {
  return sample_conditioned_batch(spec, codes, m, {}, rng);
}

ContrastiveBatch sample_conditioned_batch(const SyntheticDatasetSpec& spec,
                                          const Codebooks& codes, int m,
                                          const std::vector<int>& held,
                                          SeededRng& rng) {
  if (m < 1) throw std::invalid_argument("sample_batch: m must be >= 1");
  std::vector<bool> is_held(static_cast<std::size_t>(spec.n_features), false);
  for (int j : held) {
    if (j < 0 || j >= spec.n_features)
      throw std::invalid_argument("sample_batch: held feature out of range");
    is_held[static_cast<std::size_t>(j)] = true;
  }

  LatentSample shared = sample_latent(spec, rng);
  auto draw = [&]() {
    LatentSample z = sample_latent(spec, rng);
    for (int j = 0; j < spec.n_features; ++j)
      if (is_held[static_cast<std::size_t>(j)]) z.values[j] = shared.values[j];
    return z;
  };

  ContrastiveBatch batch;
  batch.anchor_latent = draw();
  batch.anchor = render(spec, codes, batch.anchor_latent, rng);
  batch.positive = render(spec, codes, batch.anchor_latent, rng);
  for (int i = 0; i < m; ++i) {
    batch.negative_latents.push_back(draw());
    batch.negatives.push_back(render(spec, codes, batch.negative_latents.back(), rng));
  }
  batch.degenerate_discrimination =
      static_cast<int>(held.size()) > 0 &&
      std::all_of(is_held.begin(), is_held.end(), [](bool b) { return b; });
  return batch;
}

ProbeDataset probe_dataset(const SyntheticDatasetSpec& spec,
                           const Codebooks& codes, int n_samples,
                           SeededRng& rng, bool augment) {
  if (n_samples < 1)
    throw std::invalid_argument("probe_dataset: n_samples must be >= 1");
  ProbeDataset ds;
  ds.inputs.reserve(n_samples);
  ds.latents.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    LatentSample z = sample_latent(spec, rng);
    ds.inputs.push_back(augment ? render(spec, codes, z, rng)
                                : render_identity(spec, codes, z));
    ds.latents.push_back(std::move(z));
  }
  return ds;
}

Vector sphere_latents(int d, SeededRng& rng) {
  if (d < 2) throw std::invalid_argument("sphere_latents: d must be >= 2");
  return sphere_vector(d, rng);
}

void write_dataset(std::ostream& out, const SyntheticDatasetSpec& spec,
                   const std::vector<Vector>& inputs,
                   const std::vector<LatentSample>& latents) {
  if (inputs.size() != latents.size())
    throw std::invalid_argument("write_dataset: inputs/latents length mismatch");
  out << "# input_dim=" << spec.input_dim() << " n_features=" << spec.n_features
      << " code_dim=" << spec.code_dim << " nuisance_dim=" << spec.nuisance_dim
      << " cardinalities=";
  for (int j = 0; j < spec.n_features; ++j)
    out << (j ? "," : "") << spec.cardinalities[j];
  out << "\n";
  for (int i = 0; i < spec.input_dim(); ++i) out << (i ? "," : "") << "x" << i;
  for (int j = 0; j < spec.n_features; ++j) out << ",f" << j;
  out << "\n";
  char buf[32];
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    for (Eigen::Index i = 0; i < inputs[r].size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", inputs[r][i]);
      out << (i ? "," : "") << buf;
    }
    for (int j = 0; j < spec.n_features; ++j) out << "," << latents[r].values[j];
    out << "\n";
  }
}

}  // namespace ifm
