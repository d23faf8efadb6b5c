#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "depin/radial_profile.hpp"
#include "depin/rng.hpp"

namespace depin {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double area() const { return (x1 > x0 && y1 > y0) ? (x1 - x0) * (y1 - y0) : 0.0; }
};

/// Parameters of the random friction field.
struct ObstacleParams {
  double rho = 1.0;  // centers per unit area
  double r0 = 0.1;   // phi == f inside r0
  double r1 = 0.2;   // phi == 0 outside r1
  double f = 1.0;    // maximal pinning force
  std::uint64_t seed = 0;

  /// Throws ValidationError unless r1 > r0 > 0, rho > 0 and f >= 0.
  void validate() const;

  double disc_radius() const { return r0 + 0.5 * (r1 - r0); }
  double mollifier_radius() const { return 0.5 * (r1 - r0); }
  double spacing() const;  // 1 / sqrt(rho)
};

/// Finite computational window: periodic in x, a band [y_min, y_max] in y.
struct Domain {
  double width = 1.0;
  double y_min = 0.0;
  double y_max = 0.0;
  bool periodic_x = true;
};

/// Draws Poisson(rho * area) points uniformly in `region`. Points are wrapped
/// into [0, period) in x when period > 0.
std::vector<Point> sample_poisson(const ObstacleParams& params, const Rect& region, CounterRng& rng,
                                  double period = 0.0);

/// Random friction field phi(x, y) = f * (mollified indicator of discs of
/// radius r0 + (r1-r0)/2 around Poisson centers).
///
/// Overlapping discs combine by the pointwise maximum of the single-disc
/// profiles, which keeps phi in [0, f], phi == f on every inner disc and the
/// Lipschitz constant of a single obstacle.
///
/// Generated fields are built lazily in horizontal strips of fixed height; the
/// strip with index k always comes from the substream derive_seed(seed, {k}),
/// so the center set never depends on the order of extensions. Fixed fields
/// hold an explicit center list and cannot be extended.
class ObstacleField {
 public:
  enum class Mode { Generated, Fixed };

  static constexpr double kDefaultStripSpacings = 8.0;

  /// Generated field over [0, width) with strips -1 and 0 materialized.
  /// strip_height <= 0 picks 8 / sqrt(rho).
  ObstacleField(const ObstacleParams& params, double width, double strip_height = 0.0);

  /// Read-only field with an explicit center list (used for tests and for
  /// loading dumps). The band defaults to the whole line.
  static ObstacleField with_centers(const ObstacleParams& params, double width,
                                    std::vector<Point> centers,
                                    double y_min = -std::numeric_limits<double>::infinity(),
                                    double y_max = std::numeric_limits<double>::infinity());

  const ObstacleParams& params() const { return params_; }
  const Domain& domain() const { return domain_; }
  std::span<const Point> centers() const { return centers_; }
  Mode mode() const { return mode_; }
  double strip_height() const { return strip_height_; }
  const RadialProfile& profile() const { return *profile_; }
  /// Bumped on every change of the center set.
  std::uint64_t generation() const { return generation_; }

  /// phi at (x, y). Requires [y - r1, y + r1] inside the band, throws OutOfBand otherwise.
  double phi(double x, double y) const;

  /// f * profile(distance): contribution of a single isolated obstacle.
  double single_obstacle(double distance) const;

  /// True when phi may be queried anywhere in [y_lo, y_hi].
  bool covers(double y_lo, double y_hi) const;

  /// Generates strips so that the band reaches at least new_y_max.
  /// No-op when new_y_max <= y_max. Throws for Fixed fields.
  void extend_band(double new_y_max);

  /// Generates strips (above or below) so that covers(y_lo, y_hi) holds.
  void ensure_band(double y_lo, double y_hi);

  /// Canonical representative of x in [0, width).
  double wrap_x(double x) const;
  /// Minimum-image difference a - b for a, b in [0, width).
  double periodic_dx(double a, double b) const;

  /// Calls fn(index, squared_distance) for each center within `radius` of
  /// (x, y). radius must not exceed r1.
  template <class Fn>
  void for_each_near(double x, double y, double radius, Fn&& fn) const;

  /// Indices of centers inside the closed rectangle (x-range taken modulo width).
  std::vector<std::size_t> centers_in(const Rect& rect) const;

  /// Squared distance from (x, y) to the closest center, or +inf. Only
  /// centers within `radius` (<= r1) are examined.
  double nearest_sq(double x, double y, double radius) const;

  /// JSON-lines dump: one header record, then one {"x","y"} record per center.
  void dump(std::ostream& os, const std::string& meta_json = "{}") const;
  static ObstacleField load(std::istream& is);

 private:
  ObstacleField() = default;
  void generate_strip(std::int64_t k);
  void rebuild_index();

  ObstacleParams params_;
  Domain domain_;
  Mode mode_ = Mode::Generated;
  double strip_height_ = 0.0;
  std::int64_t strip_lo_ = 0;  // inclusive
  std::int64_t strip_hi_ = -1;  // inclusive
  std::vector<Point> centers_;
  std::shared_ptr<const RadialProfile> profile_;
  std::uint64_t generation_ = 0;
  bool origin_generated_ = false;  // loaded from a dump of a generated field

  // Uniform cell index, cells at least r1 wide in both directions.
  int ncols_ = 1;
  double cell_w_ = 1.0;
  double cell_h_ = 1.0;
  std::int64_t row_lo_ = 0;
  std::int64_t nrows_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
};

/// Sample mean of nearest-neighbour distances (periodic metric in x). Centers
/// whose nearest neighbour could lie outside the band are skipped. Throws
/// ValidationError for fewer than two centers.
double nearest_obstacle_stats(const ObstacleField& field);

template <class Fn>
void ObstacleField::for_each_near(double x, double y, double radius, Fn&& fn) const {
  if (nrows_ == 0) return;
  const double xc = wrap_x(x);
  const std::int64_t row = static_cast<std::int64_t>(std::floor(y / cell_h_));
  int col = static_cast<int>(xc / cell_w_);
  if (col >= ncols_) col = ncols_ - 1;
  int cols[3];
  int ncol_visit = 0;
  if (ncols_ <= 3) {
    for (int c = 0; c < ncols_; ++c) cols[ncol_visit++] = c;
  } else {
    cols[0] = (col + ncols_ - 1) % ncols_;
    cols[1] = col;
    cols[2] = (col + 1) % ncols_;
    ncol_visit = 3;
  }
  const double r2 = radius * radius;
  for (std::int64_t r = row - 1; r <= row + 1; ++r) {
    const std::int64_t rr = r - row_lo_;
    if (rr < 0 || rr >= nrows_) continue;
    for (int ci = 0; ci < ncol_visit; ++ci) {
      for (std::uint32_t idx : cells_[static_cast<std::size_t>(rr * ncols_ + cols[ci])]) {
        const Point& c = centers_[idx];
        const double dx = periodic_dx(xc, c.x);
        const double dy = y - c.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= r2) fn(static_cast<std::size_t>(idx), d2);
      }
    }
  }
}

}  // namespace depin
