#include "ifm/theorycheck.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ifm {

Vector OracleEncoder::apply(const std::vector<Vector>& latents) const {
  if (output_feature < 0 || output_feature >= static_cast<int>(latents.size()))
    throw std::invalid_argument("oracle: latent tuple too short");
  return latents[static_cast<std::size_t>(output_feature)];
}

OracleEncoder build_oracle(int feature, OracleMode mode, int n_features) {
  if (feature < 0 || feature >= n_features)
    throw std::invalid_argument("build_oracle: feature out of range");
  OracleEncoder enc;
  enc.target_feature = feature;
  enc.mode = mode;
  if (mode == OracleMode::distinguish) {
    enc.output_feature = feature;
  } else {
    if (n_features < 2)
      throw std::invalid_argument("build_oracle: suppress mode needs >= 2 features");
    enc.output_feature = feature == 0 ? 1 : 0;
  }
  return enc;
}

double uniform_circle_unif(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("uniform_circle_unif: tau > 0");
  return std::log(std::cyl_bessel_i(0.0, 1.0 / tau));
}

bool CircleOptimumReport::passed() const {
  return losses_indistinguishable && anchors_hold && collapse_matches &&
         probes_separated;
}

namespace {

int angular_bin(const Vector& z, int bins) {
  const double angle = std::atan2(z[1], z[0]);  // [-pi, pi]
  const double unit = (angle + std::numbers::pi) / (2.0 * std::numbers::pi);
  int b = static_cast<int>(unit * bins);
  return std::min(std::max(b, 0), bins - 1);
}

std::vector<Vector> draw_latent_tuple(int n_features, int d, SeededRng& rng) {
  std::vector<Vector> z;
  z.reserve(n_features);
  for (int j = 0; j < n_features; ++j) z.push_back(sphere_latents(d, rng));
  return z;
}

LimitingLossEstimate oracle_limiting_loss(const OracleEncoder& enc, int n_mc,
                                          int pool_size, double tau,
                                          SeededRng& rng) {
  std::vector<Vector> anchors, positives, pool;
  anchors.reserve(n_mc);
  positives.reserve(n_mc);
  // A positive pair shares its latent draw, so both embeddings coincide.
  for (int k = 0; k < n_mc; ++k) {
    const auto z = draw_latent_tuple(2, 2, rng);
    anchors.push_back(enc.apply(z));
    positives.push_back(enc.apply(z));
  }
  pool.reserve(pool_size);
  for (int i = 0; i < pool_size; ++i)
    pool.push_back(enc.apply(draw_latent_tuple(2, 2, rng)));
  return limiting_loss_from_embeddings(anchors, positives, pool, tau);
}

}  // namespace

CircleOptimumReport circle_optimum_check(const CircleOptimumOptions& opts, SeededRng& rng) {
  if (opts.n_mc < 100) throw std::invalid_argument("circle_optimum_check: n_mc too small");

  constexpr int kFeature = 0;
  const OracleEncoder f_disc = build_oracle(kFeature, OracleMode::distinguish, 2);
  const OracleEncoder f_supp = build_oracle(kFeature, OracleMode::suppress, 2);

  CircleOptimumReport report;
  report.analytic_total = uniform_circle_unif(opts.tau);
  report.collapse_expected = 1.0 / opts.tau;

  report.disc = oracle_limiting_loss(f_disc, opts.n_mc, opts.pool_size,
                                     opts.tau, rng);
  report.supp = oracle_limiting_loss(f_supp, opts.n_mc, opts.pool_size,
                                     opts.tau, rng);

  // Collapse encoder: every embedding equals one fixed unit vector.
  {
    Vector u = Vector::Zero(2);
    u[0] = 1.0;
    const std::vector<Vector> rep(256, u);
    const LimitingLossEstimate collapse =
        limiting_loss_from_embeddings(rep, rep, rep, opts.tau);
    report.collapse_unif = collapse.unif;
  }

  // Probes on the target feature, discretized into angular bins.
  {
    std::vector<Vector> emb_supp, emb_disc;
    std::vector<int> bins;
    for (int i = 0; i < opts.probe_samples; ++i) {
      const auto z = draw_latent_tuple(2, 2, rng);
      emb_supp.push_back(f_supp.apply(z));
      emb_disc.push_back(f_disc.apply(z));
      bins.push_back(angular_bin(z[kFeature], opts.probe_bins));
    }
    const int n_train = opts.probe_samples * 4 / 5;
    auto split_train = [&](const std::vector<Vector>& e) {
      return std::vector<Vector>(e.begin(), e.begin() + n_train);
    };
    auto split_test = [&](const std::vector<Vector>& e) {
      return std::vector<Vector>(e.begin() + n_train, e.end());
    };
    const std::vector<int> y_train(bins.begin(), bins.begin() + n_train);
    const std::vector<int> y_test(bins.begin() + n_train, bins.end());

    const LinearProbe p_supp =
        train_probe(split_train(emb_supp), y_train, opts.probe_bins);
    const LinearProbe p_disc =
        train_probe(split_train(emb_disc), y_train, opts.probe_bins);
    report.probe_acc_supp = probe_accuracy(p_supp, split_test(emb_supp), y_test);
    report.probe_acc_disc = probe_accuracy(p_disc, split_test(emb_disc), y_test);
    report.probe_chance = 1.0 / opts.probe_bins;
  }

  const double combined_se =
      std::sqrt(report.supp.se_total() * report.supp.se_total() +
                report.disc.se_total() * report.disc.se_total());
  report.losses_indistinguishable =
      std::abs(report.supp.total() - report.disc.total()) <= 2.0 * combined_se;
  report.anchors_hold =
      std::abs(report.supp.total() - report.analytic_total) <=
          2.0 * report.supp.se_total() &&
      std::abs(report.disc.total() - report.analytic_total) <=
          2.0 * report.disc.se_total();
  report.collapse_matches =
      std::abs(report.collapse_unif - report.collapse_expected) <= 1e-6;
  report.probes_separated =
      report.probe_acc_disc - report.probe_acc_supp > 0.5;
  return report;
}

ConditionedSuppressionReport conditioned_suppression_check(const SyntheticDatasetSpec& spec,
                        const std::vector<int>& held,
                        const TrainOptions& train_opts,
                        const ReadoutOptions& readout_opts, SeededRng& rng) {
  TrainOptions opts = train_opts;
  opts.held_features = held;
  const TrainResult trained = train_encoder(spec, opts);

  const Codebooks codes = make_codes(spec);
  ConditionedSuppressionReport report;
  report.held = held;
  report.probe = readout(trained.encoder, spec, codes, rng, readout_opts);

  std::vector<bool> is_held(static_cast<std::size_t>(spec.n_features), false);
  for (int j : held) is_held[static_cast<std::size_t>(j)] = true;

  double held_sum = 0.0, comp_sum = 0.0;
  int held_count = 0, comp_count = 0;
  for (int j = 0; j < spec.n_features; ++j) {
    const double score = suppression_score(report.probe, j);
    report.scores.push_back(score);
    if (is_held[static_cast<std::size_t>(j)]) {
      held_sum += score;
      ++held_count;
    } else {
      comp_sum += score;
      ++comp_count;
    }
  }
  report.mean_held_score = held_count ? held_sum / held_count : 0.0;
  report.mean_complement_score = comp_count ? comp_sum / comp_count : 0.0;
  return report;
}

}  // namespace ifm
