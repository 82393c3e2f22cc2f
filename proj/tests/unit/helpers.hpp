#pragma once

#include <array>
#include <random>

#include "holodisc/grid.hpp"

namespace testing {

using holodisc::cplx;
using holodisc::CVector;

inline CVector vec(std::initializer_list<cplx> xs) {
  CVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (cplx x : xs) v[k++] = x;
  return v;
}

/// Uniform point in the disc of the given radius.
inline cplx random_point(std::mt19937_64& rng, double radius = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::polar(radius * std::sqrt(u(rng)), 2.0 * holodisc::kPi * u(rng));
}

/// Random quadratic polynomial in zeta, conj(zeta) with coefficients of
/// size at most `scale`; values in C^n.
struct RandomPoly {
  int n = 1;
  std::vector<std::array<cplx, 6>> c;  // 1, z, zb, z^2, z zb, zb^2 per component

  RandomPoly(std::mt19937_64& rng, int n_, double scale) : n(n_), c(n_) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& row : c)
      for (auto& x : row) x = {u(rng), u(rng)};
  }
  CVector operator()(cplx z) const {
    const cplx zb = std::conj(z);
    CVector v(n);
    for (int k = 0; k < n; ++k) {
      const auto& a = c[k];
      v[k] = a[0] + a[1] * z + a[2] * zb + a[3] * z * z + a[4] * z * zb + a[5] * zb * zb;
    }
    return v;
  }
};

inline double max_abs_diff(const holodisc::GridMap& a, const holodisc::GridMap& b) {
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

}  // namespace testing
