#pragma once

// Reference values computed independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace depin::testing {

/// Convolution of the unit-mass bump of radius eps with the indicator of the
/// disc of radius R, at distance d from the disc center, by nested Cartesian
/// quadrature over the mollifier support (no radial reduction).
inline double mollified_disc_cartesian(double d, double R, double eps) {
  auto bump = [eps](double z1, double z2) {
    const double s2 = (z1 * z1 + z2 * z2) / (eps * eps);
    return s2 < 1.0 ? std::exp(-1.0 / (1.0 - s2)) : 0.0;
  };
  boost::math::quadrature::tanh_sinh<double> q;
  // Integral over the part of the mollifier disc where (d - z1, -z2) lies in B_R.
  auto mass = [&](double disc_r, double center) {
    auto inner = [&](double z1) {
      const double a = eps * eps - z1 * z1;
      if (a <= 0.0) return 0.0;
      double half = std::sqrt(a);
      if (disc_r < INFINITY) {
        const double b = disc_r * disc_r - (center - z1) * (center - z1);
        if (b <= 0.0) return 0.0;
        half = std::min(half, std::sqrt(b));
      }
      if (half <= 0.0) return 0.0;
      return q.integrate([&](double z2) { return bump(z1, z2); }, -half, half, 1e-13);
    };
    double lo = -eps, hi = eps;
    if (disc_r < INFINITY) lo = std::max(lo, center - disc_r);
    if (lo >= hi) return 0.0;
    // Split where the binding constraint changes.
    double cuts[4] = {lo, lo, hi, hi};
    if (disc_r < INFINITY && center > 0.0) {
      const double z = (eps * eps - disc_r * disc_r + center * center) / (2.0 * center);
      if (z > lo && z < hi) cuts[1] = cuts[2] = z;
    }
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (cuts[k + 1] > cuts[k]) total += q.integrate(inner, cuts[k], cuts[k + 1], 1e-13);
    }
    return total;
  };
  return mass(R, d) / mass(INFINITY, 0.0);
}

/// Pointwise minimum over every 1-Lipschitz row choice landing on occupied
/// cells, by depth-first enumeration. Empty when no such choice exists.
inline std::optional<std::vector<int>> exhaustive_minimal_selection(
    const std::vector<std::vector<bool>>& occupied, bool periodic) {
  const int cols = static_cast<int>(occupied.size());
  const int rows = static_cast<int>(occupied.front().size());
  std::vector<int> cur(cols), best(cols, rows);
  bool any = false;
  auto dfs = [&](auto&& self, int k) -> void {
    if (k == cols) {
      if (periodic && cols > 1 && std::abs(cur[cols - 1] - cur[0]) > 1) return;
      any = true;
      for (int i = 0; i < cols; ++i) best[i] = std::min(best[i], cur[i]);
      return;
    }
    for (int r = 0; r < rows; ++r) {
      if (!occupied[k][r]) continue;
      if (k > 0 && std::abs(r - cur[k - 1]) > 1) continue;
      cur[k] = r;
      self(self, k + 1);
    }
  };
  dfs(dfs, 0);
  if (!any) return std::nullopt;
  return best;
}

}  // namespace depin::testing
