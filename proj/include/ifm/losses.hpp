#pragma once

#include "ifm/numerics.hpp"

#include <vector>

namespace ifm {

enum class LossVariant { standard, post_norm, pre_norm };

/// One pointwise contrastive instance: anchor v, positive v+, and m
/// negatives v-_i. `unit_norm` marks whether the standard-variant invariant
/// (every vector unit length within 1e-9) is expected to hold; perturbed
/// batches clear it because their vectors intentionally leave the sphere.
struct EmbeddingBatch {
  Vector anchor;
  Vector positive;
  std::vector<Vector> negatives;
  bool unit_norm = true;

  int dim() const { return static_cast<int>(anchor.size()); }
  int num_negatives() const { return static_cast<int>(negatives.size()); }
};

/// Checks dimensions, finiteness, m >= 1, and (when flagged) unit norms.
void validate_batch(const EmbeddingBatch& b);

struct LossConfig {
  double tau = 0.5;
  double eps_pos = 0.0;
  std::vector<double> eps_neg = {0.0};  // length 1 broadcasts to every negative
  double alpha = 1.0;
  double beta = 0.0;
  LossVariant variant = LossVariant::standard;

  double eps_neg_for(int i, int m) const;
  void validate(int m) const;

  /// Config with a single shared epsilon for the positive and all negatives.
  static LossConfig with_eps(double tau, double eps, double alpha = 1.0);
};

struct LossGrad {
  Vector d_anchor;
  Vector d_positive;
  std::vector<Vector> d_negatives;
};

/// Softmax weights of the InfoNCE denominator; positive + negatives sum to 1.
struct SoftmaxWeights {
  double positive = 0.0;
  std::vector<double> negatives;
};

double cosine_similarity(const Vector& u, const Vector& w);

/// Gradient of sim(u, w) with respect to u. Orthogonal to u by scale
/// invariance; for unit inputs its norm is sqrt(1 - sim^2).
Vector cosine_similarity_grad(const Vector& u, const Vector& w);

// ---------------------------------------------------------------------------
// Standard (raw inner product) objectives
// ---------------------------------------------------------------------------

/// Pointwise InfoNCE: -log( e^{v.v+/tau} / (e^{v.v+/tau} + sum_i e^{v.v-_i/tau}) ).
double infonce_pointwise(const EmbeddingBatch& b, double tau);

SoftmaxWeights infonce_weights(const EmbeddingBatch& b, double tau);

/// Analytic gradients: d_negatives[j] = p_j v/tau, d_positive = (p+ - 1) v/tau,
/// d_anchor by total differentiation.
LossGrad infonce_grads(const EmbeddingBatch& b, double tau);

/// Perturbed loss in closed form: positive logit lowered by eps+/tau, each
/// negative logit raised by eps_i/tau. Equals infonce_pointwise when eps = 0.
double ifm_pointwise(const EmbeddingBatch& b, const LossConfig& cfg);

/// Same value computed by perturbing the anchor copy inside the positive
/// logit instead of the positive itself; exact for unit inputs.
double ifm_pointwise_anchor_side(const EmbeddingBatch& b, const LossConfig& cfg);

/// Gradient of ifm_pointwise with respect to every batch vector.
LossGrad ifm_grads(const EmbeddingBatch& b, const LossConfig& cfg);

/// Worst-case batch under the constant ascent directions: v-_i + eps_i v and
/// v+ - eps+ v. Outputs are intentionally left off the sphere.
EmbeddingBatch ifm_optimal_updates(const EmbeddingBatch& b, const LossConfig& cfg);

/// (infonce + alpha * ifm) / 2.
double combined_objective(const EmbeddingBatch& b, const LossConfig& cfg);

/// Gradient of combined_objective with respect to every batch vector.
LossGrad combined_grads(const EmbeddingBatch& b, const LossConfig& cfg);

/// InfoNCE with negatives reweighted by w_i = m * softmax(beta * v.v-_i).
/// beta = 0 gives unit weights and reduces to infonce_pointwise.
double hardness_weighted_pointwise(const EmbeddingBatch& b, double tau, double beta);

/// Gradient of hardness_weighted_pointwise, including the dependence of the
/// weights on the similarities.
LossGrad hardness_weighted_grads(const EmbeddingBatch& b, double tau, double beta);

// ---------------------------------------------------------------------------
// Normalized variants
// ---------------------------------------------------------------------------

/// Applies the optimal updates, re-normalizes every perturbed vector to unit
/// length, then evaluates InfoNCE. A perturbation that annihilates a vector
/// is a degenerate-input error.
double ifm_postnorm_pointwise(const EmbeddingBatch& b, const LossConfig& cfg);

/// InfoNCE parameterized by cosine similarity; defined for any nonzero
/// vectors, not just unit ones.
double prenorm_pointwise(const EmbeddingBatch& b, double tau);

/// Exact gradients of prenorm_pointwise. d_negatives[j] is proportional to
/// v/|v| - sim(v-_j, v) v-_j/|v-_j|.
LossGrad prenorm_grads(const EmbeddingBatch& b, double tau);

/// Projected gradient ascent of the cosine loss over per-vector eps-balls.
/// step_size <= 0 selects the default eps/steps per vector.
EmbeddingBatch prenorm_ascent(const EmbeddingBatch& b, const LossConfig& cfg,
                              int steps, double step_size = 0.0);

}  // namespace ifm
