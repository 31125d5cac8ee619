#include "ifm/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ifm {

namespace {

constexpr double kUnitTol = 1e-9;

// Logits [l+, l-_1 .. l-_m] with optional epsilon shifts.
std::vector<double> logits(const EmbeddingBatch& b, double tau,
                           double eps_pos, const LossConfig* eps_src) {
  const int m = b.num_negatives();
  std::vector<double> l(static_cast<std::size_t>(m) + 1);
  l[0] = (dot(b.anchor, b.positive) - eps_pos) / tau;
  for (int i = 0; i < m; ++i) {
    const double eps = eps_src ? eps_src->eps_neg_for(i, m) : 0.0;
    l[static_cast<std::size_t>(i) + 1] = (dot(b.anchor, b.negatives[i]) + eps) / tau;
  }
  return l;
}

SoftmaxWeights softmax_of(const std::vector<double>& l) {
  double mx = l[0];
  for (double x : l) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : l) z += std::exp(x - mx);
  SoftmaxWeights w;
  w.positive = std::exp(l[0] - mx) / z;
  w.negatives.resize(l.size() - 1);
  for (std::size_t i = 1; i < l.size(); ++i)
    w.negatives[i - 1] = std::exp(l[i] - mx) / z;
  return w;
}

double nce_from_logits(const std::vector<double>& l) {
  return -l[0] + log_sum_exp(l);
}

LossGrad grads_from_weights(const EmbeddingBatch& b, double tau,
                            const SoftmaxWeights& w) {
  const int m = b.num_negatives();
  LossGrad g;
  g.d_positive = (w.positive - 1.0) / tau * b.anchor;
  g.d_negatives.resize(m);
  for (int i = 0; i < m; ++i)
    g.d_negatives[i] = w.negatives[i] / tau * b.anchor;
  g.d_anchor = (w.positive - 1.0) / tau * b.positive;
  for (int i = 0; i < m; ++i)
    g.d_anchor += w.negatives[i] / tau * b.negatives[i];
  return g;
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("loss: tau must be > 0");
}

}  // namespace

void validate_batch(const EmbeddingBatch& b) {
  if (b.negatives.empty())
    throw std::invalid_argument("batch: need at least one negative");
  const Eigen::Index d = b.anchor.size();
  if (d == 0) throw std::invalid_argument("batch: empty anchor");
  if (b.positive.size() != d)
    throw std::invalid_argument("batch: positive dimension mismatch");
  for (const auto& n : b.negatives)
    if (n.size() != d)
      throw std::invalid_argument("batch: negative dimension mismatch");
  if (!all_finite(b.anchor) || !all_finite(b.positive))
    throw std::invalid_argument("batch: non-finite entries");
  for (const auto& n : b.negatives)
    if (!all_finite(n)) throw std::invalid_argument("batch: non-finite entries");
  if (b.unit_norm) {
    auto check_unit = [](const Vector& v) {
      if (std::abs(norm(v) - 1.0) > kUnitTol)
        throw std::invalid_argument("batch: vector not unit norm within 1e-9");
    };
    check_unit(b.anchor);
    check_unit(b.positive);
    for (const auto& n : b.negatives) check_unit(n);
  }
}

double LossConfig::eps_neg_for(int i, int m) const {
  if (eps_neg.size() == 1) return eps_neg[0];
  if (static_cast<int>(eps_neg.size()) != m)
    throw std::invalid_argument("loss: eps_neg must be scalar or length m");
  return eps_neg[static_cast<std::size_t>(i)];
}

void LossConfig::validate(int m) const {
  check_tau(tau);
  if (eps_pos < 0.0) throw std::invalid_argument("loss: eps_pos must be >= 0");
  if (eps_neg.empty()) throw std::invalid_argument("loss: eps_neg empty");
  if (eps_neg.size() != 1 && static_cast<int>(eps_neg.size()) != m)
    throw std::invalid_argument("loss: eps_neg must be scalar or length m");
  for (double e : eps_neg)
    if (e < 0.0) throw std::invalid_argument("loss: eps_neg entries must be >= 0");
  if (alpha < 0.0) throw std::invalid_argument("loss: alpha must be >= 0");
  if (beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");
}

LossConfig LossConfig::with_eps(double tau, double eps, double alpha) {
  LossConfig cfg;
  cfg.tau = tau;
  cfg.eps_pos = eps;
  cfg.eps_neg = {eps};
  cfg.alpha = alpha;
  return cfg;
}

double cosine_similarity(const Vector& u, const Vector& w) {
  const double nu = norm(u);
  const double nw = norm(w);
  if (nu == 0.0 || nw == 0.0)
    throw std::domain_error("cosine_similarity: zero vector");
  return dot(u, w) / (nu * nw);
}

Vector cosine_similarity_grad(const Vector& u, const Vector& w) {
  const double nu = norm(u);
  const double nw = norm(w);
  if (nu == 0.0 || nw == 0.0)
    throw std::domain_error("cosine_similarity_grad: zero vector");
  const double sim = dot(u, w) / (nu * nw);
  return w / (nu * nw) - sim / (nu * nu) * u;
}

double infonce_pointwise(const EmbeddingBatch& b, double tau) {
  validate_batch(b);
  check_tau(tau);
  return nce_from_logits(logits(b, tau, 0.0, nullptr));
}

SoftmaxWeights infonce_weights(const EmbeddingBatch& b, double tau) {
  validate_batch(b);
  check_tau(tau);
  return softmax_of(logits(b, tau, 0.0, nullptr));
}

LossGrad infonce_grads(const EmbeddingBatch& b, double tau) {
  validate_batch(b);
  check_tau(tau);
  return grads_from_weights(b, tau, softmax_of(logits(b, tau, 0.0, nullptr)));
}

double ifm_pointwise(const EmbeddingBatch& b, const LossConfig& cfg) {
  validate_batch(b);
  cfg.validate(b.num_negatives());
  return nce_from_logits(logits(b, cfg.tau, cfg.eps_pos, &cfg));
}

double ifm_pointwise_anchor_side(const EmbeddingBatch& b, const LossConfig& cfg) {
  validate_batch(b);
  const int m = b.num_negatives();
  cfg.validate(m);
  // Positive logit from the perturbed anchor copy (v - eps+ v+) . v+;
  // negatives keep their own additive shifts.
  const Vector va = b.anchor - cfg.eps_pos * b.positive;
  std::vector<double> l(static_cast<std::size_t>(m) + 1);
  l[0] = dot(va, b.positive) / cfg.tau;
  for (int i = 0; i < m; ++i)
    l[static_cast<std::size_t>(i) + 1] =
        (dot(b.anchor, b.negatives[i]) + cfg.eps_neg_for(i, m)) / cfg.tau;
  return nce_from_logits(l);
}

LossGrad ifm_grads(const EmbeddingBatch& b, const LossConfig& cfg) {
  validate_batch(b);
  cfg.validate(b.num_negatives());
  return grads_from_weights(b, cfg.tau,
                            softmax_of(logits(b, cfg.tau, cfg.eps_pos, &cfg)));
}

EmbeddingBatch ifm_optimal_updates(const EmbeddingBatch& b, const LossConfig& cfg) {
  validate_batch(b);
  const int m = b.num_negatives();
  cfg.validate(m);
  EmbeddingBatch out = b;
  out.positive = b.positive - cfg.eps_pos * b.anchor;
  for (int i = 0; i < m; ++i)
    out.negatives[i] = b.negatives[i] + cfg.eps_neg_for(i, m) * b.anchor;
  out.unit_norm = false;
  return out;
}

double combined_objective(const EmbeddingBatch& b, const LossConfig& cfg) {
  return 0.5 * (infonce_pointwise(b, cfg.tau) + cfg.alpha * ifm_pointwise(b, cfg));
}

LossGrad combined_grads(const EmbeddingBatch& b, const LossConfig& cfg) {
  validate_batch(b);
  const int m = b.num_negatives();
  cfg.validate(m);
  const auto w_plain = softmax_of(logits(b, cfg.tau, 0.0, nullptr));
  const auto w_eps = softmax_of(logits(b, cfg.tau, cfg.eps_pos, &cfg));
  LossGrad g0 = grads_from_weights(b, cfg.tau, w_plain);
  const LossGrad g1 = grads_from_weights(b, cfg.tau, w_eps);
  const double a = 0.5 * cfg.alpha;
  g0.d_anchor = 0.5 * g0.d_anchor + a * g1.d_anchor;
  g0.d_positive = 0.5 * g0.d_positive + a * g1.d_positive;
  for (int i = 0; i < m; ++i)
    g0.d_negatives[i] = 0.5 * g0.d_negatives[i] + a * g1.d_negatives[i];
  return g0;
}

double hardness_weighted_pointwise(const EmbeddingBatch& b, double tau, double beta) {
  validate_batch(b);
  check_tau(tau);
  if (beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");
  const int m = b.num_negatives();
  // log w_i = log m + log softmax(beta * v.v-_i), folded into the logits so
  // the reduction stays a single stable log-sum-exp.
  std::vector<double> tilt(m);
  for (int i = 0; i < m; ++i) tilt[i] = beta * dot(b.anchor, b.negatives[i]);
  const double tilt_lse = log_sum_exp(tilt);

  std::vector<double> l(static_cast<std::size_t>(m) + 1);
  const double lpos = dot(b.anchor, b.positive) / tau;
  l[0] = lpos;
  for (int i = 0; i < m; ++i) {
    const double logw = std::log(static_cast<double>(m)) + tilt[i] - tilt_lse;
    l[static_cast<std::size_t>(i) + 1] =
        dot(b.anchor, b.negatives[i]) / tau + logw;
  }
  return -lpos + log_sum_exp(l);
}

LossGrad hardness_weighted_grads(const EmbeddingBatch& b, double tau, double beta) {
  validate_batch(b);
  check_tau(tau);
  if (beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");
  const int m = b.num_negatives();

  std::vector<double> s(m);
  for (int i = 0; i < m; ++i) s[i] = dot(b.anchor, b.negatives[i]);
  const double s_pos = dot(b.anchor, b.positive);

  // sigma = softmax(beta * s); T = sum_i sigma_i e^{s_i/tau}.
  std::vector<double> sigma(m);
  {
    double mx = beta * s[0];
    for (int i = 0; i < m; ++i) mx = std::max(mx, beta * s[i]);
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
      sigma[i] = std::exp(beta * s[i] - mx);
      z += sigma[i];
    }
    for (int i = 0; i < m; ++i) sigma[i] /= z;
  }
  double t_term = 0.0;
  for (int i = 0; i < m; ++i) t_term += sigma[i] * std::exp(s[i] / tau);
  const double z_all = std::exp(s_pos / tau) + m * t_term;

  const double dl_dspos = -1.0 / tau + std::exp(s_pos / tau) / (tau * z_all);
  std::vector<double> dl_ds(m);
  for (int j = 0; j < m; ++j)
    dl_ds[j] = m / z_all * sigma[j] *
               (std::exp(s[j] / tau) * (1.0 / tau + beta) - beta * t_term);

  LossGrad g;
  g.d_positive = dl_dspos * b.anchor;
  g.d_negatives.resize(m);
  for (int j = 0; j < m; ++j) g.d_negatives[j] = dl_ds[j] * b.anchor;
  g.d_anchor = dl_dspos * b.positive;
  for (int j = 0; j < m; ++j) g.d_anchor += dl_ds[j] * b.negatives[j];
  return g;
}

double ifm_postnorm_pointwise(const EmbeddingBatch& b, const LossConfig& cfg) {
  if (cfg.variant != LossVariant::post_norm && cfg.variant != LossVariant::standard)
    throw std::invalid_argument("ifm_postnorm_pointwise: wrong variant");
  EmbeddingBatch p = ifm_optimal_updates(b, cfg);
  p.positive = l2_normalize(p.positive);
  for (auto& n : p.negatives) n = l2_normalize(n);
  p.unit_norm = true;
  return infonce_pointwise(p, cfg.tau);
}

double prenorm_pointwise(const EmbeddingBatch& b, double tau) {
  check_tau(tau);
  if (b.negatives.empty())
    throw std::invalid_argument("batch: need at least one negative");
  const int m = b.num_negatives();
  std::vector<double> l(static_cast<std::size_t>(m) + 1);
  l[0] = cosine_similarity(b.anchor, b.positive) / tau;
  for (int i = 0; i < m; ++i)
    l[static_cast<std::size_t>(i) + 1] =
        cosine_similarity(b.anchor, b.negatives[i]) / tau;
  return nce_from_logits(l);
}

LossGrad prenorm_grads(const EmbeddingBatch& b, double tau) {
  check_tau(tau);
  if (b.negatives.empty())
    throw std::invalid_argument("batch: need at least one negative");
  const int m = b.num_negatives();
  std::vector<double> l(static_cast<std::size_t>(m) + 1);
  l[0] = cosine_similarity(b.anchor, b.positive) / tau;
  for (int i = 0; i < m; ++i)
    l[static_cast<std::size_t>(i) + 1] =
        cosine_similarity(b.anchor, b.negatives[i]) / tau;
  const auto w = softmax_of(l);

  LossGrad g;
  g.d_positive = (w.positive - 1.0) / tau * cosine_similarity_grad(b.positive, b.anchor);
  g.d_negatives.resize(m);
  for (int i = 0; i < m; ++i)
    g.d_negatives[i] =
        w.negatives[i] / tau * cosine_similarity_grad(b.negatives[i], b.anchor);
  g.d_anchor = (w.positive - 1.0) / tau * cosine_similarity_grad(b.anchor, b.positive);
  for (int i = 0; i < m; ++i)
    g.d_anchor += w.negatives[i] / tau * cosine_similarity_grad(b.anchor, b.negatives[i]);
  return g;
}

EmbeddingBatch prenorm_ascent(const EmbeddingBatch& b, const LossConfig& cfg,
                              int steps, double step_size) {
  if (steps < 1) throw std::invalid_argument("prenorm_ascent: steps must be >= 1");
  const int m = b.num_negatives();
  cfg.validate(m);

  EmbeddingBatch cur = b;
  cur.unit_norm = false;

  auto project = [](Vector& x, const Vector& center, double eps) {
    Vector delta = x - center;
    const double n = norm(delta);
    if (n > eps) x = center + (eps / n) * delta;
  };

  for (int s = 0; s < steps; ++s) {
    const LossGrad g = prenorm_grads(cur, cfg.tau);
    if (cfg.eps_pos > 0.0) {
      const double gn = norm(g.d_positive);
      if (gn > 1e-15) {
        const double step = step_size > 0.0 ? step_size : cfg.eps_pos / steps;
        cur.positive += (step / gn) * g.d_positive;
        project(cur.positive, b.positive, cfg.eps_pos);
      }
    }
    for (int i = 0; i < m; ++i) {
      const double eps = cfg.eps_neg_for(i, m);
      if (eps <= 0.0) continue;
      const double gn = norm(g.d_negatives[i]);
      if (gn <= 1e-15) continue;
      const double step = step_size > 0.0 ? step_size : eps / steps;
      cur.negatives[i] += (step / gn) * g.d_negatives[i];
      project(cur.negatives[i], b.negatives[i], eps);
    }
  }
  return cur;
}

}  // namespace ifm
