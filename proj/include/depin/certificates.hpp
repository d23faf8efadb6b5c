#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "depin/obstacle_field.hpp"

namespace depin {

enum class SegmentKind { Connector, Cap, Chord };

std::string_view to_string(SegmentKind kind);

/// A graph piece over [a, b]: an arc of the circle centered at (xc, yc) with
/// the given radius (upper branch for connectors, lower branch for caps) or a
/// straight chord. Endpoint heights are stored for chords and as a cache.
struct ArcSegment {
  SegmentKind kind = SegmentKind::Chord;
  double xc = 0.0, yc = 0.0;
  double radius = 0.0;  // 0 for chords
  double a = 0.0, b = 0.0;
  double ya = 0.0, yb = 0.0;

  /// -1 for connectors (u'' < 0), +1 for caps, 0 for chords.
  int concavity() const;
  double value(double x) const;
  double slope(double x) const;
  /// Signed graph curvature u'' / (1 + u'^2)^{3/2}: -1/R, +1/R or 0.
  double curvature() const;
};

/// Lower circular cap through center +- (r, 0) with curvature f_in.
/// Empty when f_in * r >= 1 (vertical or undefined endpoint slopes).
std::optional<ArcSegment> obstacle_cap(const Point& center, double r, double f_in);

/// Endpoint slope r / sqrt(f_in^-2 - r^2) of a cap, the outward derivative.
double cap_slope(double r, double f_in);

/// Concave arc of curvature kappa from p1 to p2 whose endpoint slopes stay in
/// [-alpha, alpha]. Empty when kappa exceeds 2 xbar / (xbar^2 + ybar^2) or when
/// the slope condition fails. kappa == 0 gives the chord.
std::optional<ArcSegment> arc_connect(const Point& p1, const Point& p2, double kappa, double alpha);

/// Minimal selection row(k) >= 0 with occupied[k][row(k)] and
/// |row(k) - row(k+1)| <= 1 (also between the last and first column when
/// periodic). Least fixed point of the two raising rules; empty when some
/// column would need a row past the grid.
std::optional<std::vector<int>> minimal_lipschitz_selection(
    const std::vector<std::vector<bool>>& occupied, bool periodic);

/// Layout of the selection boxes: column k spans
/// [k*period + r1, k*period + l - r1], row j spans [y0 + j*h, y0 + (j+1)*h).
struct SelectionGrid {
  int columns = 1;
  int rows = 1;
  double period = 1.0;
  double l = 1.0;
  double h = 1.0;
  double y0 = 0.0;
  double r1 = 0.0;

  Rect box(int column, int row) const;
};

/// Occupancy of the selection boxes followed by minimal_lipschitz_selection.
std::optional<std::vector<int>> find_lipschitz_selection(const ObstacleField& field,
                                                         const SelectionGrid& grid);

struct BarrierGeometry {
  double h = 0.0;
  double d = 0.0;  // nominal gap; the realised one is period - l
  double l = 0.0;
  double c0 = 0.0;
  double f_out = 0.0;
  double f_in = 0.0;
  double r = 0.0;
  double alpha = 0.0;
  double p_c = 0.0;
  double h_scale = 1.0;
  SelectionGrid grid;
};

struct Junction {
  double x = 0.0;
  double y = 0.0;
  double left_slope = 0.0;
  double right_slope = 0.0;
  double gap = 0.0;  // |left value - right value|
};

/// Stationary periodic curve: caps over the selected obstacles joined by
/// connector arcs. Segments cover [segments.front().a, segments.front().a + width).
struct Barrier {
  std::vector<ArcSegment> segments;
  std::vector<Junction> junctions;
  std::vector<int> selection;
  std::vector<Point> anchors;  // selected obstacle per column
  BarrierGeometry geometry;
  double width = 0.0;

  double value(double x) const;
  double min_height() const;
};

struct ResidualReport {
  bool ok = false;
  double min_residual = 0.0;
  double min_residual_x = 0.0;
  double min_residual_y = 0.0;
  std::size_t min_residual_segment = 0;
  double concavity_margin = 0.0;  // min over junctions of left - right slope
  double max_gap = 0.0;
  std::size_t samples = 0;
  std::string failure;
};

struct LowerCert {
  double f_certified = 0.0;  // tau + margin
  double margin = 0.0;
  Barrier barrier;
  ResidualReport report;
};

/// Default settings of the barrier construction.
struct BarrierConfig {
  double p_c = 15.0 / 16.0;
  int j_max = 64;
  std::size_t samples_per_segment = 64;
  double tolerance = 1e-12;
  /// Scale factors tried in turn for the box height.
  std::vector<double> h_scales{1.0, 0.70710678118654752, 0.5, 0.35355339059327376, 0.25};
};

/// Geometry recipe for a given h scale. Does not look at the field.
BarrierGeometry barrier_geometry(const ObstacleParams& params, double width, double h_scale,
                                 const BarrierConfig& cfg = {});

/// Samples residual -curvature + phi - margin on every segment (plus a
/// refinement near each end) and the corner condition at each junction.
ResidualReport verify_supersolution(const Barrier& barrier, const ObstacleField& field,
                                    double margin, const BarrierConfig& cfg = {});

/// Barrier for a single h scale, or empty when no selection exists or the
/// arcs are infeasible. No verification.
std::optional<Barrier> assemble_barrier(ObstacleField& field, const BarrierGeometry& geometry);

/// Pinning certificate at force F: tries the h scales in turn and returns the
/// first barrier that verifies with margin F - tau. Extends generated fields.
std::optional<LowerCert> build_barrier(ObstacleField& field, double F, double tau,
                                       const BarrierConfig& cfg = {});

/// Largest certified force found by bisecting build_barrier over [tau, tau + f].
std::optional<LowerCert> best_lower_certificate(ObstacleField& field, double tau,
                                                const BarrierConfig& cfg = {},
                                                double rel_tol = 1e-6);

/// Grid cell (column, row) of side h; row 0 starts at y = 0.
struct Cube {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cube&, const Cube&) = default;
};

struct PathCert {
  double h = 0.0;
  int columns = 0;
  int rows = 0;
  std::vector<Cube> cubes;
  double f_ub = 0.0;  // tau + 2 / h
  double v0 = 0.0;
};

/// True when no center lies within r1 of the closed cube.
bool cube_is_free(const ObstacleField& field, double h, const Cube& cube);

/// Whether the cube and its four neighbours contain no center at all.
bool cross_is_empty(const ObstacleField& field, double h, const Cube& cube);

/// Obstacle-free channel of cubes of side W / floor(W / h) from row 0 to the
/// row reaching `height`, using the moves left, right, up (periodic in x).
/// Extends generated fields to cover the search region.
std::optional<PathCert> find_free_path(ObstacleField& field, double h, double height, double tau);

/// Path with the largest h = W / m, m = 1, 2, ..., with h >= h_min.
std::optional<PathCert> best_free_path(ObstacleField& field, double h_min, double height,
                                       double tau);

/// Independent recheck of a path: moves, injectivity, row span, and a brute
/// force distance test of every cube against every center.
bool recheck_path(const ObstacleField& field, const PathCert& path);

struct EvolutionSample {
  int phase = 0;  // 0 bulge, 1 translation, 2 turn
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double normal_velocity = 0.0;
  double curvature = 0.0;
  double margin = 0.0;
};

struct EvolutionReport {
  bool ok = false;
  double min_margin = 0.0;
  double kappa_at_contact = 0.0;  // bulge curvature when it reaches the walls
  double t_contact = 0.0;
  std::vector<EvolutionSample> samples;
};

/// Bulge curvature 2 v0 t / (v0^2 t^2 + (h/2)^2).
double bulge_curvature(double t, double v0, double h);

/// Samples the propagating construction inside cubes of side h (initial
/// bulge, translation of a half disc, turn with a flat cap) and evaluates
/// margin = curvature + F - (epsilon v_n + tau) with phi == 0. Throws
/// ValidationError unless epsilon * v0 + tau <= F - 2 / h.
EvolutionReport construct_path_evolution(double h, double F, double v0, double epsilon,
                                         double tau, std::size_t samples_per_curve = 129,
                                         std::size_t time_samples = 64);

struct AnalyticBounds {
  double f_lb = 0.0;
  double f_ub = 0.0;
};

/// Plug-in constants: tau + min(c sqrt(rho), f / 2) and tau + 4 sqrt(rho) / sqrt(-log(p_c) / 5).
AnalyticBounds analytic_bounds(const ObstacleParams& params, double tau, double p_c = 0.9375);
/// The constant c(r0, f) of the lower bound.
double lower_bound_constant(double r0, double f);

nlohmann::json to_json(const ArcSegment& seg);
nlohmann::json to_json(const LowerCert& cert);
nlohmann::json to_json(const PathCert& path);
nlohmann::json to_json(const EvolutionReport& report, bool with_samples = false);

}  // namespace depin
