#include "ifm/latent_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace ifm {

std::vector<ScoredId> nn_retrieve(const MemoryBank& bank, const Vector& query,
                                  int k) {
  if (bank.embeddings.empty())
    throw std::invalid_argument("nn_retrieve: empty bank");
  if (bank.embeddings.size() != bank.ids.size())
    throw std::invalid_argument("nn_retrieve: embeddings/ids length mismatch");
  if (k < 1) throw std::invalid_argument("nn_retrieve: k must be >= 1");

  std::vector<ScoredId> scored;
  scored.reserve(bank.embeddings.size());
  for (std::size_t i = 0; i < bank.embeddings.size(); ++i)
    scored.push_back({bank.ids[i], cosine_similarity(query, bank.embeddings[i])});
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return scored;
}

double eps_ball_oracle(const EmbeddingBatch& b, const LossConfig& cfg,
                       const OracleOptions& opts) {
  validate_batch(b);
  const int m = b.num_negatives();
  cfg.validate(m);
  if (cfg.variant != LossVariant::standard)
    throw std::invalid_argument("eps_ball_oracle: standard variant only");
  if (opts.restarts < 1 || opts.steps < 1)
    throw std::invalid_argument("eps_ball_oracle: bad search budget");

  SeededRng rng(opts.seed);
  const int d = b.dim();

  auto project = [](Vector& delta, double eps) {
    const double n = norm(delta);
    if (n > eps) delta *= eps / n;
  };

  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    Vector delta_pos = Vector::Zero(d);
    std::vector<Vector> delta_neg(m, Vector::Zero(d));
    if (r > 0) {
      // Random feasible start: uniform direction, radius fraction of eps.
      if (cfg.eps_pos > 0.0)
        delta_pos = rng.uniform() * cfg.eps_pos * sphere_vector(d, rng);
      for (int i = 0; i < m; ++i) {
        const double eps = cfg.eps_neg_for(i, m);
        if (eps > 0.0) delta_neg[i] = rng.uniform() * eps * sphere_vector(d, rng);
      }
    }

    EmbeddingBatch cur = b;
    cur.unit_norm = false;
    for (int s = 0; s <= opts.steps; ++s) {
      cur.positive = b.positive + delta_pos;
      for (int i = 0; i < m; ++i) cur.negatives[i] = b.negatives[i] + delta_neg[i];
      best = std::max(best, infonce_pointwise(cur, cfg.tau));
      if (s == opts.steps) break;

      const LossGrad g = infonce_grads(cur, cfg.tau);
      if (cfg.eps_pos > 0.0) {
        const double gn = norm(g.d_positive);
        if (gn > 1e-15)
          delta_pos += (cfg.eps_pos / 20.0 / gn) * g.d_positive;
        project(delta_pos, cfg.eps_pos);
      }
      for (int i = 0; i < m; ++i) {
        const double eps = cfg.eps_neg_for(i, m);
        if (eps <= 0.0) continue;
        const double gn = norm(g.d_negatives[i]);
        if (gn > 1e-15)
          delta_neg[i] += (eps / 20.0 / gn) * g.d_negatives[i];
        project(delta_neg[i], eps);
      }
    }
  }
  return best;
}

double RobustSplit::mean_steps() const {
  if (steps_taken.empty()) return 0.0;
  double s = 0.0;
  for (int k : steps_taken) s += k;
  return s / static_cast<double>(steps_taken.size());
}

RobustSplit fgsm_split(const Encoder& enc, const LinearProbe& probe,
                       const LabeledDataset& data, double eps_step,
                       int max_steps, SeededRng& rng) {
  if (data.inputs.size() != data.labels.size() || data.inputs.empty())
    throw std::invalid_argument("fgsm_split: inputs/labels mismatch");
  if (data.n_classes < 2)
    throw std::invalid_argument("fgsm_split: need >= 2 classes");
  if (!(eps_step > 0.0))
    throw std::invalid_argument("fgsm_split: eps_step must be > 0");
  if (max_steps < 1)
    throw std::invalid_argument("fgsm_split: max_steps must be >= 1");

  RobustSplit split;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const int target =
        static_cast<int>(rng.bounded(static_cast<std::uint64_t>(data.n_classes)));
    Vector x = data.inputs[i];
    int steps = 0;
    bool reached = false;
    for (; steps <= max_steps; ++steps) {
      const ForwardTape tape = forward(enc, x);
      if (probe_predict(probe, tape.embedding) == target) {
        reached = true;
        break;
      }
      if (steps == max_steps) break;
      const Vector d_emb = probe_ce_grad_embedding(probe, tape.embedding, target);
      const ParamGrads g = backward(enc, tape, d_emb);
      for (Eigen::Index c = 0; c < x.size(); ++c) {
        const double s = g.d_input[c];
        x[c] -= eps_step * (s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0));
      }
    }
    if (!reached) {
      ++split.dropped;
      continue;
    }
    split.adv_inputs.push_back(std::move(x));
    split.true_labels.push_back(data.labels[i]);
    split.target_labels.push_back(target);
    split.steps_taken.push_back(steps);
  }
  return split;
}

RefinetuneResult refinetune_eval(const Encoder& enc, const LabeledDataset& train,
                                 const RobustSplit& split,
                                 const LabeledDataset& clean_test,
                                 const ProbeOptions& opts) {
  if (split.adv_inputs.empty())
    throw std::invalid_argument("refinetune_eval: empty robust split");

  const std::vector<Vector> train_emb = embed_all(enc, train.inputs);
  const std::vector<Vector> adv_emb = embed_all(enc, split.adv_inputs);
  const std::vector<Vector> test_emb = embed_all(enc, clean_test.inputs);

  const LinearProbe p_orig = train_probe(train_emb, train.labels, train.n_classes, opts);
  const LinearProbe p_rob =
      train_probe(adv_emb, split.true_labels, train.n_classes, opts);
  const LinearProbe p_nonrob =
      train_probe(adv_emb, split.target_labels, train.n_classes, opts);

  RefinetuneResult r;
  r.acc_original = probe_accuracy(p_orig, test_emb, clean_test.labels);
  r.acc_robust = probe_accuracy(p_rob, test_emb, clean_test.labels);
  r.acc_nonrobust = probe_accuracy(p_nonrob, test_emb, clean_test.labels);
  return r;
}

void write_robust_split(std::ostream& out, const RobustSplit& split) {
  const int dim = split.adv_inputs.empty()
                      ? 0
                      : static_cast<int>(split.adv_inputs[0].size());
  out << "# input_dim=" << dim << " rows=" << split.adv_inputs.size()
      << " dropped=" << split.dropped << "\n";
  for (int i = 0; i < dim; ++i) out << (i ? "," : "") << "x" << i;
  out << ",label,target,steps\n";
  char buf[32];
  for (std::size_t r = 0; r < split.adv_inputs.size(); ++r) {
    for (Eigen::Index i = 0; i < split.adv_inputs[r].size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", split.adv_inputs[r][i]);
      out << (i ? "," : "") << buf;
    }
    out << "," << split.true_labels[r] << "," << split.target_labels[r] << ","
        << split.steps_taken[r] << "\n";
  }
}

}  // namespace ifm
