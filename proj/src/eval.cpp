#include "ifm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ifm {

double LimitingLossEstimate::se_total() const {
  return std::sqrt(se_align * se_align + se_unif * se_unif);
}

LinearProbe train_probe(const std::vector<Vector>& embeddings,
                        const std::vector<int>& labels, int n_classes,
                        const ProbeOptions& opts) {
  if (embeddings.empty() || embeddings.size() != labels.size())
    throw std::invalid_argument("train_probe: embeddings/labels mismatch");
  if (n_classes < 2) throw std::invalid_argument("train_probe: need >= 2 classes");
  std::set<int> present(labels.begin(), labels.end());
  for (int y : labels)
    if (y < 0 || y >= n_classes)
      throw std::invalid_argument("train_probe: label out of range");
  if (present.size() < 2)
    throw std::domain_error("train_probe: single-class labels");

  const int n = static_cast<int>(embeddings.size());
  const int d = static_cast<int>(embeddings[0].size());
  Matrix E(n, d);
  for (int i = 0; i < n; ++i) E.row(i) = embeddings[i].transpose();

  Matrix W = Matrix::Zero(n_classes, d);
  Vector b = Vector::Zero(n_classes);

  for (int it = 0; it < opts.iters; ++it) {
    Matrix logits = E * W.transpose();           // n x C
    logits.rowwise() += b.transpose();
    Vector row_max = logits.rowwise().maxCoeff();
    Matrix P = (logits.colwise() - row_max).array().exp();
    Vector row_sum = P.rowwise().sum();
    P.array().colwise() /= row_sum.array();
    for (int i = 0; i < n; ++i) P(i, labels[i]) -= 1.0;  // softmax minus one-hot

    Matrix gW = (P.transpose() * E) / n + opts.l2 * W;
    Vector gb = P.colwise().sum().transpose() / n;
    W -= opts.lr * gW;
    b -= opts.lr * gb;
  }
  return LinearProbe{std::move(W), std::move(b)};
}

Vector probe_logits(const LinearProbe& probe, const Vector& embedding) {
  return probe.weights * embedding + probe.bias;
}

int probe_predict(const LinearProbe& probe, const Vector& embedding) {
  Eigen::Index idx = 0;
  probe_logits(probe, embedding).maxCoeff(&idx);
  return static_cast<int>(idx);
}

double probe_accuracy(const LinearProbe& probe,
                      const std::vector<Vector>& embeddings,
                      const std::vector<int>& labels) {
  if (embeddings.empty() || embeddings.size() != labels.size())
    throw std::invalid_argument("probe_accuracy: embeddings/labels mismatch");
  int hits = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    if (probe_predict(probe, embeddings[i]) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(embeddings.size());
}

Vector probe_ce_grad_embedding(const LinearProbe& probe, const Vector& embedding,
                               int target) {
  if (target < 0 || target >= probe.weights.rows())
    throw std::invalid_argument("probe_ce_grad_embedding: target out of range");
  Vector l = probe_logits(probe, embedding);
  const double mx = l.maxCoeff();
  Vector p = (l.array() - mx).exp();
  p /= p.sum();
  p[target] -= 1.0;
  return probe.weights.transpose() * p;
}

std::vector<Vector> embed_all(const Encoder& enc, const std::vector<Vector>& xs) {
  std::vector<Vector> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(enc, x).embedding);
  return out;
}

ProbeResult readout(const Encoder& enc, const SyntheticDatasetSpec& spec,
                    const Codebooks& codes, SeededRng& rng,
                    const ReadoutOptions& opts) {
  spec.validate();
  if (opts.n_samples < 10)
    throw std::invalid_argument("readout: n_samples too small");

  const ProbeDataset ds = probe_dataset(spec, codes, opts.n_samples, rng,
                                        opts.augment);
  const std::vector<Vector> emb = embed_all(enc, ds.inputs);

  const int n_train = static_cast<int>(opts.train_fraction * opts.n_samples);
  if (n_train < 2 || n_train >= opts.n_samples)
    throw std::invalid_argument("readout: bad train fraction");

  ProbeResult result;
  result.tau_eval = opts.tau_eval;
  for (int j = 0; j < spec.n_features; ++j) {
    std::vector<Vector> train_e(emb.begin(), emb.begin() + n_train);
    std::vector<Vector> test_e(emb.begin() + n_train, emb.end());
    std::vector<int> train_y, test_y;
    for (int i = 0; i < n_train; ++i) train_y.push_back(ds.label(i, j));
    for (int i = n_train; i < opts.n_samples; ++i) test_y.push_back(ds.label(i, j));
    const LinearProbe probe =
        train_probe(train_e, train_y, spec.cardinalities[j], opts.probe);
    result.accuracy.push_back(probe_accuracy(probe, test_e, test_y));
    result.chance.push_back(1.0 / spec.cardinalities[j]);
  }

  double loss_sum = 0.0;
  const BatchSource source = batch_source(enc, spec, codes);
  for (int k = 0; k < opts.eval_batches; ++k)
    loss_sum += infonce_pointwise(source(opts.eval_negatives, rng), opts.tau_eval);
  result.eval_loss = loss_sum / opts.eval_batches;
  return result;
}

double suppression_score(const ProbeResult& result, int feature) {
  if (feature < 0 || feature >= static_cast<int>(result.accuracy.size()))
    throw std::invalid_argument("suppression_score: feature out of range");
  const double chance = result.chance[feature];
  const double raw = (result.accuracy[feature] - chance) / (1.0 - chance);
  return std::clamp(raw, 0.0, 1.0);
}

LimitingLossEstimate limiting_loss_from_embeddings(
    const std::vector<Vector>& anchors, const std::vector<Vector>& positives,
    const std::vector<Vector>& pool, double tau) {
  if (anchors.size() != positives.size() || anchors.empty())
    throw std::invalid_argument("limiting_loss: anchors/positives mismatch");
  if (pool.empty()) throw std::invalid_argument("limiting_loss: empty pool");
  if (!(tau > 0.0)) throw std::invalid_argument("limiting_loss: tau must be > 0");

  const int K = static_cast<int>(anchors.size());
  const int M = static_cast<int>(pool.size());
  const int d = static_cast<int>(anchors[0].size());

  LimitingLossEstimate est;

  // Alignment: (1/2tau) E |f(x) - f(x+)|^2.
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < K; ++k) {
    const Vector diff = anchors[k] - positives[k];
    const double term = dot(diff, diff) / (2.0 * tau);
    sum += term;
    sum_sq += term * term;
  }
  est.align = sum / K;
  est.se_align =
      K > 1 ? std::sqrt(std::max(0.0, sum_sq / K - est.align * est.align) /
                        (K - 1))
            : 0.0;

  // Uniformity: E_{x+} log E_{x-} exp(f(x+).f(x-)/tau) against a shared pool.
  // The temperature is folded into the pool matrix and the query block is
  // processed against pool chunks so every buffer is allocated once.
  Matrix P(d, M);
  for (int i = 0; i < M; ++i) P.col(i) = pool[i] / tau;

  // Cauchy-Schwarz bound on the scaled inner products makes a single shift
  // valid for every row of the log-sum-exp.
  double max_q = 0.0, max_p = 0.0;
  for (const auto& q : positives) max_q = std::max(max_q, norm(q));
  for (const auto& p : pool) max_p = std::max(max_p, norm(p));
  const double shift = max_q * max_p / tau;

  double t_sum = 0.0, t_sq = 0.0;
  const int block = 1024;
  const int chunk = 4096;
  Matrix Q(block, d);
  Matrix S(block, chunk);
  Vector mx(block), acc(block);
  for (int start = 0; start < K; start += block) {
    const int rows = std::min(block, K - start);
    for (int r = 0; r < rows; ++r) Q.row(r) = positives[start + r].transpose();
    mx.head(rows).setConstant(shift);
    acc.head(rows).setZero();
    for (int cstart = 0; cstart < M; cstart += chunk) {
      const int cols = std::min(chunk, M - cstart);
      S.topRows(rows).leftCols(cols).noalias() =
          Q.topRows(rows) * P.middleCols(cstart, cols);
      for (int c = 0; c < cols; ++c)
        acc.head(rows).array() +=
            (S.col(c).head(rows) - mx.head(rows)).array().exp();
    }
    for (int r = 0; r < rows; ++r) {
      const double lse = mx[r] + std::log(acc[r]) - std::log(M);
      t_sum += lse;
      t_sq += lse * lse;
    }
  }
  est.unif = t_sum / K;
  est.se_unif =
      K > 1 ? std::sqrt(std::max(0.0, t_sq / K - est.unif * est.unif) / (K - 1))
            : 0.0;
  return est;
}

LimitingLossEstimate limiting_loss(const Encoder& enc,
                                   const SyntheticDatasetSpec& spec,
                                   const Codebooks& codes, int n_mc, double tau,
                                   SeededRng& rng,
                                   const LimitingLossOptions& opts) {
  if (n_mc < 100) throw std::invalid_argument("limiting_loss: n_mc must be >= 100");
  std::vector<Vector> anchors, positives, pool;
  anchors.reserve(n_mc);
  positives.reserve(n_mc);
  for (int k = 0; k < n_mc; ++k) {
    const LatentSample z = sample_latent(spec, rng);
    anchors.push_back(forward(enc, render(spec, codes, z, rng)).embedding);
    positives.push_back(forward(enc, render(spec, codes, z, rng)).embedding);
  }
  const int M = std::min(opts.pool_size, n_mc);
  pool.reserve(M);
  for (int i = 0; i < M; ++i) {
    const LatentSample z = sample_latent(spec, rng);
    pool.push_back(forward(enc, render(spec, codes, z, rng)).embedding);
  }
  return limiting_loss_from_embeddings(anchors, positives, pool, tau);
}

BatchSource batch_source(const Encoder& enc, const SyntheticDatasetSpec& spec,
                         const Codebooks& codes) {
  return [&enc, spec, codes](int m, SeededRng& rng) {
    const ContrastiveBatch cb = sample_batch(spec, codes, m, rng);
    EmbeddingBatch b;
    b.anchor = forward(enc, cb.anchor).embedding;
    b.positive = forward(enc, cb.positive).embedding;
    for (const auto& x : cb.negatives)
      b.negatives.push_back(forward(enc, x).embedding);
    return b;
  };
}

std::vector<GapPoint> finite_m_gap(const BatchSource& source, double tau,
                                   std::span<const int> m_values,
                                   int batches_per_m, SeededRng& rng) {
  if (m_values.empty()) throw std::invalid_argument("finite_m_gap: no m values");
  for (std::size_t i = 1; i < m_values.size(); ++i)
    if (m_values[i] <= m_values[i - 1])
      throw std::invalid_argument("finite_m_gap: m values must increase");
  if (batches_per_m < 2)
    throw std::invalid_argument("finite_m_gap: need >= 2 batches per m");

  std::vector<GapPoint> points;
  for (int m : m_values) {
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < batches_per_m; ++k) {
      // -log m + 1/tau makes the sequence converge to align + unif.
      const double term =
          infonce_pointwise(source(m, rng), tau) - std::log(m) + 1.0 / tau;
      sum += term;
      sum_sq += term * term;
    }
    GapPoint p;
    p.m = m;
    p.gap = sum / batches_per_m;
    p.se = std::sqrt(std::max(0.0, sum_sq / batches_per_m - p.gap * p.gap) /
                     (batches_per_m - 1));
    points.push_back(p);
  }
  return points;
}

std::vector<double> sweep_correlate(const std::vector<ProbeResult>& results) {
  if (results.size() < 3)
    throw std::invalid_argument("sweep_correlate: need >= 3 results");
  const std::size_t n_features = results[0].accuracy.size();
  for (const auto& r : results)
    if (r.accuracy.size() != n_features)
      throw std::invalid_argument("sweep_correlate: inconsistent feature counts");

  std::vector<double> losses;
  for (const auto& r : results) losses.push_back(r.eval_loss);

  std::vector<double> corr;
  for (std::size_t j = 0; j < n_features; ++j) {
    std::vector<double> errors;
    for (const auto& r : results) errors.push_back(1.0 - r.accuracy[j]);
    corr.push_back(pearson(errors, losses));
  }
  return corr;
}

}  // namespace ifm
