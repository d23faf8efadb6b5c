#include "depin/radial_profile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "depin/errors.hpp"

namespace depin {
namespace {

using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
constexpr double kQuadTol = 1e-12;
constexpr unsigned kQuadDepth = 20;

// Angular measure of the circle of radius s around a point at distance d
// from the origin that falls inside the disc of radius R.
double inside_angle(double s, double d, double R) {
  if (s <= 0.0) return d < R ? 2.0 * std::numbers::pi : 0.0;
  if (d <= 0.0) return s < R ? 2.0 * std::numbers::pi : 0.0;
  const double c = (R * R - d * d - s * s) / (2.0 * d * s);
  if (c >= 1.0) return 2.0 * std::numbers::pi;
  if (c <= -1.0) return 0.0;
  return 2.0 * std::numbers::pi - 2.0 * std::acos(c);
}

}  // namespace

double RadialProfile::bump(double s) {
  const double a = s * s;
  if (a >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - a));
}

RadialProfile::RadialProfile(double r0, double r1, std::size_t knots)
    : r0_(r0), r1_(r1), eps_(0.5 * (r1 - r0)), disc_radius_(r0 + 0.5 * (r1 - r0)) {
  if (!(r0 > 0.0) || !(r1 > r0)) throw ValidationError("radial profile needs r1 > r0 > 0");
  if (knots < 4) throw ValidationError("radial profile needs at least 4 knots");

  // Relative tolerance 1e-8 is the contract; the integrand is smooth so we ask for more.
  norm_ = 2.0 * std::numbers::pi *
          Quad::integrate([this](double s) { return s * bump(s / eps_); }, 0.0, eps_, kQuadDepth,
                          kQuadTol);

  values_.resize(knots);
  slopes_.assign(knots, 0.0);
  step_ = (r1_ - r0_) / static_cast<double>(knots - 1);
  values_.front() = 1.0;
  values_.back() = 0.0;
  for (std::size_t k = 1; k + 1 < knots; ++k) values_[k] = exact(r0_ + step_ * static_cast<double>(k));

  // Fritsch-Carlson slopes on a uniform grid: harmonic mean of adjacent
  // secants, zero at extrema. The end slopes are zero because g is flat there.
  for (std::size_t k = 1; k + 1 < knots; ++k) {
    const double a = (values_[k] - values_[k - 1]) / step_;
    const double b = (values_[k + 1] - values_[k]) / step_;
    slopes_[k] = (a * b <= 0.0) ? 0.0 : 2.0 / (1.0 / a + 1.0 / b);
  }

  for (std::size_t k = 0; k + 1 < knots; ++k) {
    const double y0 = values_[k], y1 = values_[k + 1];
    const double m0 = slopes_[k], m1 = slopes_[k + 1];
    // derivative of the Hermite cubic on [0,1] is A t^2 + B t + C (per unit length)
    const double A = 6.0 * (y0 - y1) / step_ + 3.0 * m0 + 3.0 * m1;
    const double B = -6.0 * (y0 - y1) / step_ - 4.0 * m0 - 2.0 * m1;
    const double C = m0;
    double best = std::max(std::abs(m0), std::abs(m1));
    if (A != 0.0) {
      const double t = -B / (2.0 * A);
      if (t > 0.0 && t < 1.0) best = std::max(best, std::abs((A * t + B) * t + C));
    }
    lipschitz_ = std::max(lipschitz_, best);
  }
}

double RadialProfile::exact(double d) const {
  if (d <= r0_) return 1.0;
  if (d >= r1_) return 0.0;
  auto integrand = [&](double s) { return s * bump(s / eps_) * inside_angle(s, d, disc_radius_); };
  // The angular factor has a square-root kink at s = |R - d|; split there and
  // let tanh-sinh absorb the endpoint behaviour.
  thread_local boost::math::quadrature::tanh_sinh<double> ts;
  const double kink = std::abs(disc_radius_ - d);
  double total = 0.0;
  if (kink > 0.0 && kink < eps_) {
    total = ts.integrate(integrand, 0.0, kink, kQuadTol) + ts.integrate(integrand, kink, eps_, kQuadTol);
  } else {
    total = ts.integrate(integrand, 0.0, eps_, kQuadTol);
  }
  return std::clamp(total / norm_, 0.0, 1.0);
}

double RadialProfile::operator()(double d) const {
  if (d <= r0_) return 1.0;
  if (d >= r1_) return 0.0;
  const double t_full = (d - r0_) / step_;
  const std::size_t last = values_.size() - 2;
  const std::size_t k = std::min(static_cast<std::size_t>(t_full), last);
  const double t = t_full - static_cast<double>(k);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  const double v = h00 * values_[k] + h10 * step_ * slopes_[k] + h01 * values_[k + 1] +
                   h11 * step_ * slopes_[k + 1];
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace depin
