#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace ifm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Deterministic pseudo-random stream: xoshiro256++ seeded through
/// splitmix64. The draw sequence depends only on the seed, not on the
/// platform or standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();
  /// Uniform integer in [0, n). Rejection sampling, n >= 1.
  std::uint64_t bounded(std::uint64_t n);

  /// Child stream seeded from this one. Parallel work splits seeds this way.
  SeededRng fork();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

/// Inner product accumulated sequentially left to right, so loss values are
/// bit-reproducible for a given seed.
double dot(const Vector& a, const Vector& b);

/// Euclidean norm of a, via the sequential dot.
double norm(const Vector& a);

/// a scaled to unit Euclidean norm. Zero input is a degenerate-input error.
Vector l2_normalize(const Vector& a);

/// log(sum_k exp(xs[k])) computed with a max shift.
double log_sum_exp(std::span<const double> xs);

/// Sample Pearson correlation of two equal-length, nonconstant series.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Gaussian vector of dimension d.
Vector gaussian_vector(int d, SeededRng& rng);

/// Uniform draw from the unit sphere S^{d-1}.
Vector sphere_vector(int d, SeededRng& rng);

bool all_finite(const Vector& a);
bool all_finite(const Matrix& a);

}  // namespace ifm
