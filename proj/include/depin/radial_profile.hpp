#pragma once

#include <cstddef>
#include <vector>

namespace depin {

/// Radial profile of a mollified disc: g(d) = (eta_eps * chi_{B_R})(p) with
/// |p| = d, R = r0 + eps and eps = (r1 - r0) / 2. The mollifier is the
/// standard bump exp(-1 / (1 - s^2)) rescaled to radius eps with unit 2D mass.
///
/// g == 1 for d <= r0 and g == 0 for d >= r1. In between the value is
/// tabulated on uniform knots (from a 1D polar quadrature) and evaluated by
/// monotone (Fritsch-Carlson) cubic Hermite interpolation.
class RadialProfile {
 public:
  RadialProfile(double r0, double r1, std::size_t knots = 2048);

  double operator()(double d) const;

  /// Direct quadrature of the convolution at distance d (no table).
  double exact(double d) const;

  /// Max |dg/dd| of the interpolant, per unit length.
  double lipschitz() const { return lipschitz_; }

  double inner() const { return r0_; }
  double outer() const { return r1_; }
  std::size_t knots() const { return values_.size(); }

  /// Unnormalized bump on the unit disc, zero for |s| >= 1.
  static double bump(double s);

 private:
  double r0_;
  double r1_;
  double eps_;
  double disc_radius_;
  double norm_ = 0.0;  // 2D mass of the unnormalized rescaled bump
  double step_ = 0.0;
  double lipschitz_ = 0.0;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

}  // namespace depin
