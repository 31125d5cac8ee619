#pragma once

#include "ifm/numerics.hpp"

#include <cmath>
#include <utility>

namespace ifm::fd {

/// Central-difference gradient of f() with respect to x, mutating x in place
/// coordinate by coordinate and restoring it. Independent of any analytic
/// gradient code.
template <typename F>
Vector gradient(F&& f, Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|b|, floor), as a vector-norm ratio.
inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-8) {
  const double scale = std::max(std::sqrt(b.squaredNorm()), floor);
  return std::sqrt((a - b).squaredNorm()) / scale;
}

}  // namespace ifm::fd
