#include "ifm/eval.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace ifm;

namespace {

// Two well-separated Gaussian blobs.
void blob_data(std::vector<Vector>& xs, std::vector<int>& ys, int n,
               SeededRng& rng) {
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.bounded(2));
    Vector x = 0.3 * gaussian_vector(4, rng);
    x[0] += label ? 4.0 : -4.0;
    xs.push_back(x);
    ys.push_back(label);
  }
}

}  // namespace

TEST_CASE("train_probe: separable data reaches accuracy 1") {
  SeededRng rng(1);
  std::vector<Vector> xs;
  std::vector<int> ys;
  blob_data(xs, ys, 200, rng);
  const LinearProbe probe = train_probe(xs, ys, 2);
  CHECK(probe_accuracy(probe, xs, ys) == 1.0);
}

TEST_CASE("train_probe: independent labels sit at chance") {
  double acc_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng rng(seed);
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (int i = 0; i < 600; ++i) {
      xs.push_back(sphere_vector(6, rng));
      ys.push_back(static_cast<int>(rng.bounded(4)));
    }
    std::vector<Vector> train_x(xs.begin(), xs.begin() + 400);
    std::vector<int> train_y(ys.begin(), ys.begin() + 400);
    std::vector<Vector> test_x(xs.begin() + 400, xs.end());
    std::vector<int> test_y(ys.begin() + 400, ys.end());
    const LinearProbe probe = train_probe(train_x, train_y, 4);
    acc_sum += probe_accuracy(probe, test_x, test_y);
  }
  CHECK(std::abs(acc_sum / 5.0 - 0.25) <= 0.05);
}

TEST_CASE("train_probe: determinism and degenerate labels") {
  SeededRng rng(2);
  std::vector<Vector> xs;
  std::vector<int> ys;
  blob_data(xs, ys, 100, rng);
  const LinearProbe a = train_probe(xs, ys, 2);
  const LinearProbe b = train_probe(xs, ys, 2);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);

  std::vector<int> constant(ys.size(), 1);
  CHECK_THROWS_AS(train_probe(xs, constant, 2), std::domain_error);
  CHECK_THROWS_AS(train_probe(xs, ys, 1), std::invalid_argument);
}

TEST_CASE("train_probe: accuracy stable under common positive rescaling") {
  SeededRng rng(3);
  std::vector<Vector> xs;
  std::vector<int> ys;
  for (int i = 0; i < 400; ++i) {
    const int label = static_cast<int>(rng.bounded(3));
    Vector x = 0.5 * gaussian_vector(5, rng);
    x[label] += 1.5;
    xs.push_back(x);
    ys.push_back(label);
  }
  std::vector<Vector> scaled;
  for (const auto& x : xs) scaled.push_back(3.7 * x);
  const double acc = probe_accuracy(train_probe(xs, ys, 3), xs, ys);
  const double acc_scaled =
      probe_accuracy(train_probe(scaled, ys, 3), scaled, ys);
  CHECK(std::abs(acc - acc_scaled) <= 0.01);
}

TEST_CASE("suppression_score") {
  ProbeResult r;
  r.accuracy = {0.1, 1.0, 0.55};
  r.chance = {0.1, 0.1, 0.1};
  CHECK(suppression_score(r, 0) == 0.0);
  CHECK(suppression_score(r, 1) == 1.0);
  CHECK(suppression_score(r, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(suppression_score(r, 3), std::invalid_argument);

  r.accuracy[0] = 0.05;  // below chance clips to zero
  CHECK(suppression_score(r, 0) == 0.0);
}

TEST_CASE("limiting loss: collapse encoder hits the analytic anchor") {
  Vector u = Vector::Zero(3);
  u[2] = 1.0;
  const std::vector<Vector> rep(500, u);
  for (double tau : {0.5, 1.0, 2.0}) {
    const LimitingLossEstimate est =
        limiting_loss_from_embeddings(rep, rep, rep, tau);
    CHECK(est.align == 0.0);
    CHECK(std::abs(est.unif - 1.0 / tau) <= 1e-6);
  }
}

TEST_CASE("limiting loss: uniform circle matches the quadrature oracle") {
  const double tau = 1.0;
  const double oracle = testsup::quadrature_circle_unif(tau);
  CHECK(oracle == doctest::Approx(0.23591435853869).epsilon(1e-9));

  SeededRng rng(4);
  std::vector<Vector> a, b, pool;
  for (int i = 0; i < 20000; ++i) {
    const Vector z = sphere_vector(2, rng);
    a.push_back(z);
    b.push_back(z);  // aligned positive pairs
  }
  for (int i = 0; i < 8192; ++i) pool.push_back(sphere_vector(2, rng));
  const LimitingLossEstimate est = limiting_loss_from_embeddings(a, b, pool, tau);
  CHECK(est.align == 0.0);
  CHECK(std::abs(est.unif - oracle) <= 3.0 * est.se_unif + 1e-3);

  // Uniform beats collapse at tau = 1.
  CHECK(est.total() < 1.0);
}

TEST_CASE("finite_m_gap: constant encoder reduces analytically") {
  Vector u = Vector::Zero(2);
  u[0] = 1.0;
  const double tau = 1.0;
  BatchSource constant = [&u](int m, SeededRng&) {
    EmbeddingBatch b;
    b.anchor = u;
    b.positive = u;
    b.negatives.assign(static_cast<std::size_t>(m), u);
    return b;
  };
  SeededRng rng(5);
  const std::vector<int> ms{8, 32, 128, 512};
  const auto points = finite_m_gap(constant, tau, ms, 8, rng);
  REQUIRE(points.size() == 4);
  double prev_err = 1e300;
  for (const auto& p : points) {
    // L_m = log(m+1), so the normalized value is log((m+1)/m) + 1/tau.
    const double expected = std::log((p.m + 1.0) / p.m) + 1.0 / tau;
    CHECK(std::abs(p.gap - expected) <= 1e-12);
    CHECK(p.se <= 1e-8);  // zero up to accumulation rounding
    const double err = std::abs(p.gap - 1.0 / tau);
    CHECK(err < prev_err);
    prev_err = err;
  }

  CHECK_THROWS_AS(finite_m_gap(constant, tau, std::vector<int>{8, 8}, 8, rng),
                  std::invalid_argument);
}

TEST_CASE("finite_m_gap: uniform circle approaches the limiting total") {
  SeededRng rng(6);
  BatchSource uniform = [](int m, SeededRng& r) {
    EmbeddingBatch b;
    b.anchor = sphere_vector(2, r);
    b.positive = b.anchor;
    for (int i = 0; i < m; ++i) b.negatives.push_back(sphere_vector(2, r));
    return b;
  };
  const double tau = 1.0;
  const double limit = testsup::quadrature_circle_unif(tau);
  const std::vector<int> ms{8, 64, 512};
  const auto points = finite_m_gap(uniform, tau, ms, 64, rng);
  CHECK(std::abs(points.back().gap - limit) <
        std::abs(points.front().gap - limit));
  CHECK(std::abs(points.back().gap - limit) <= 3.0 * points.back().se);
}

TEST_CASE("sweep_correlate") {
  auto result = [](double acc0, double acc1, double loss) {
    ProbeResult r;
    r.accuracy = {acc0, acc1};
    r.chance = {0.1, 0.1};
    r.eval_loss = loss;
    return r;
  };
  // Feature 0 error equals the loss exactly; feature 1 error is an exact
  // decreasing affine function of it.
  const std::vector<ProbeResult> results{
      result(0.9, 0.2, 0.1), result(0.8, 0.4, 0.2), result(0.6, 0.8, 0.4),
      result(0.5, 1.0, 0.5)};
  const std::vector<double> corr = sweep_correlate(results);
  CHECK(corr[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(corr[1] == doctest::Approx(-1.0).epsilon(1e-10));

  const std::vector<ProbeResult> dup{result(0.5, 0.5, 0.3), result(0.5, 0.5, 0.3),
                                     result(0.5, 0.5, 0.3)};
  CHECK_THROWS_AS(sweep_correlate(dup), std::domain_error);
  CHECK_THROWS_AS(sweep_correlate({result(1, 1, 1), result(0, 0, 0)}),
                  std::invalid_argument);
}

TEST_CASE("readout: random encoders read high-salience features better") {
  const SyntheticDatasetSpec spec = SyntheticDatasetSpec::trifeature();
  const Codebooks codes = make_codes(spec);
  ReadoutOptions opts;
  opts.n_samples = 1500;
  opts.eval_batches = 20;

  double high = 0.0, low = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng net_rng(seed);
    const Encoder enc = Encoder::make_mlp({spec.input_dim(), 64, 64, 8}, net_rng);
    SeededRng eval_rng(100 + seed);
    const ProbeResult r = readout(enc, spec, codes, eval_rng, opts);
    high += r.accuracy[0];  // salience 3.0
    low += r.accuracy[2];   // salience 0.7
    CHECK(r.chance[0] == doctest::Approx(0.1));
    CHECK(r.eval_loss > 0.0);
  }
  CHECK(high / 5.0 > low / 5.0);
}
