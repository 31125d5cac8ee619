#include "ifm/training.hpp"

#include <stdexcept>

namespace ifm {

TrainResult train_encoder(const SyntheticDatasetSpec& spec,
                          const TrainOptions& opts) {
  spec.validate();
  opts.loss.validate(opts.negatives);
  if (opts.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (opts.negatives < 1)
    throw std::invalid_argument("train: negatives must be >= 1");
  if (opts.pairs_per_step < 1)
    throw std::invalid_argument("train: pairs_per_step must be >= 1");
  if (opts.embed_dim < 2)
    throw std::invalid_argument("train: embed_dim must be >= 2");
  if (opts.loss.variant != LossVariant::standard)
    throw std::invalid_argument("train: only the standard variant trains");
  if (opts.loss.beta > 0.0 && opts.objective != Objective::infonce)
    throw std::invalid_argument(
        "train: beta > 0 reweights the plain loss; use objective 'infonce'");

  const Codebooks codes = make_codes(spec);

  SeededRng rng(opts.seed);
  std::vector<int> dims;
  dims.push_back(spec.input_dim());
  for (int h : opts.hidden_dims) dims.push_back(h);
  dims.push_back(opts.embed_dim);

  Encoder enc = Encoder::make_mlp(dims, rng);
  AdamState adam = AdamState::init(enc, opts.adam);

  const int tail_start = opts.steps - std::max(1, opts.steps / 10);
  double tail_sum = 0.0;
  int tail_count = 0;

  for (int step = 0; step < opts.steps; ++step) {
    ParamGrads acc = ParamGrads::zeros_like(enc);
    double loss_sum = 0.0;

    for (int p = 0; p < opts.pairs_per_step; ++p) {
      const ContrastiveBatch cb =
          sample_conditioned_batch(spec, codes, opts.negatives,
                                   opts.held_features, rng);

      const ForwardTape tape_a = forward(enc, cb.anchor);
      const ForwardTape tape_p = forward(enc, cb.positive);
      std::vector<ForwardTape> tapes_n;
      tapes_n.reserve(cb.negatives.size());
      for (const auto& x : cb.negatives) tapes_n.push_back(forward(enc, x));

      EmbeddingBatch b;
      b.anchor = tape_a.embedding;
      b.positive = tape_p.embedding;
      for (const auto& t : tapes_n) b.negatives.push_back(t.embedding);

      double loss = 0.0;
      LossGrad g;
      switch (opts.objective) {
        case Objective::infonce:
          if (opts.loss.beta > 0.0) {
            loss = hardness_weighted_pointwise(b, opts.loss.tau, opts.loss.beta);
            g = hardness_weighted_grads(b, opts.loss.tau, opts.loss.beta);
          } else {
            loss = infonce_pointwise(b, opts.loss.tau);
            g = infonce_grads(b, opts.loss.tau);
          }
          break;
        case Objective::ifm:
          loss = ifm_pointwise(b, opts.loss);
          g = ifm_grads(b, opts.loss);
          break;
        case Objective::combined:
          loss = combined_objective(b, opts.loss);
          g = combined_grads(b, opts.loss);
          break;
      }
      loss_sum += loss;

      acc.accumulate(backward(enc, tape_a, g.d_anchor));
      acc.accumulate(backward(enc, tape_p, g.d_positive));
      for (std::size_t i = 0; i < tapes_n.size(); ++i)
        acc.accumulate(backward(enc, tapes_n[i], g.d_negatives[i]));
    }

    acc.scale(1.0 / opts.pairs_per_step);
    adam_step(adam, enc, acc);

    if (step >= tail_start) {
      tail_sum += loss_sum / opts.pairs_per_step;
      ++tail_count;
    }
  }

  TrainResult result;
  result.encoder = std::move(enc);
  result.mean_loss_last_10pct = tail_count ? tail_sum / tail_count : 0.0;
  return result;
}

}  // namespace ifm
