#pragma once

#include "ifm/encoder.hpp"
#include "ifm/losses.hpp"
#include "ifm/numerics.hpp"
#include "ifm/synthdata.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ifm {

struct ProbeResult {
  std::vector<double> accuracy;  // per feature, on the held-out split
  std::vector<double> chance;    // 1/c_j
  double eval_loss = 0.0;        // InfoNCE at tau_eval
  double tau_eval = 0.5;
};

struct LimitingLossEstimate {
  double align = 0.0;
  double unif = 0.0;
  double se_align = 0.0;
  double se_unif = 0.0;

  double total() const { return align + unif; }
  double se_total() const;
};

struct LinearProbe {
  Matrix weights;  // n_classes x dim
  Vector bias;     // n_classes
};

struct ProbeOptions {
  int iters = 500;
  double l2 = 1e-4;
  double lr = 0.1;
};

/// Multinomial logistic regression fit by full-batch gradient descent with a
/// fixed iteration count; deterministic given inputs. Labels with fewer than
/// two classes present are a degenerate-input error.
LinearProbe train_probe(const std::vector<Vector>& embeddings,
                        const std::vector<int>& labels, int n_classes,
                        const ProbeOptions& opts = {});

Vector probe_logits(const LinearProbe& probe, const Vector& embedding);
int probe_predict(const LinearProbe& probe, const Vector& embedding);
double probe_accuracy(const LinearProbe& probe,
                      const std::vector<Vector>& embeddings,
                      const std::vector<int>& labels);

/// d(cross-entropy toward `target`)/d(embedding); softmax minus one-hot
/// pulled back through the probe weights.
Vector probe_ce_grad_embedding(const LinearProbe& probe, const Vector& embedding,
                               int target);

struct ReadoutOptions {
  int n_samples = 4000;
  double train_fraction = 0.8;
  ProbeOptions probe;
  int eval_batches = 200;
  int eval_negatives = 32;
  double tau_eval = 0.5;
  bool augment = true;  // probe inputs rendered with the augmentation law
};

/// Embeds a probe dataset, trains one probe per feature on the train split,
/// and reports held-out accuracy per feature plus the evaluation-time InfoNCE
/// loss at tau_eval.
ProbeResult readout(const Encoder& enc, const SyntheticDatasetSpec& spec,
                    const Codebooks& codes, SeededRng& rng,
                    const ReadoutOptions& opts = {});

/// (acc - chance) / (1 - chance), clipped to [0, 1].
double suppression_score(const ProbeResult& result, int feature);

/// Monte Carlo estimate of the limiting loss from already-embedded samples:
/// anchors[k], positives[k] form positive pairs; `pool` holds independent
/// negative embeddings shared across queries.
LimitingLossEstimate limiting_loss_from_embeddings(
    const std::vector<Vector>& anchors, const std::vector<Vector>& positives,
    const std::vector<Vector>& pool, double tau);

struct LimitingLossOptions {
  int pool_size = 16384;  // capped at n_mc
};

LimitingLossEstimate limiting_loss(const Encoder& enc,
                                   const SyntheticDatasetSpec& spec,
                                   const Codebooks& codes, int n_mc, double tau,
                                   SeededRng& rng,
                                   const LimitingLossOptions& opts = {});

/// Produces one pointwise embedding batch with m negatives.
using BatchSource = std::function<EmbeddingBatch(int m, SeededRng&)>;

BatchSource batch_source(const Encoder& enc, const SyntheticDatasetSpec& spec,
                         const Codebooks& codes);

struct GapPoint {
  int m = 0;
  double gap = 0.0;
  double se = 0.0;
};

/// Mean pointwise InfoNCE at each m, normalized by -log m + 1/tau so the
/// sequence converges to the limiting align + unif total.
std::vector<GapPoint> finite_m_gap(const BatchSource& source, double tau,
                                   std::span<const int> m_values,
                                   int batches_per_m, SeededRng& rng);

/// Per-feature Pearson correlation between readout error (1 - accuracy) and
/// the evaluation loss across runs.
std::vector<double> sweep_correlate(const std::vector<ProbeResult>& results);

/// Embeds every input through the encoder.
std::vector<Vector> embed_all(const Encoder& enc, const std::vector<Vector>& xs);

}  // namespace ifm
