#include "depin/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "depin/errors.hpp"

namespace depin {

using nlohmann::json;

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Connector: return "connector";
    case SegmentKind::Cap: return "cap";
    case SegmentKind::Chord: return "chord";
  }
  return "?";
}

int ArcSegment::concavity() const {
  switch (kind) {
    case SegmentKind::Connector: return -1;
    case SegmentKind::Cap: return 1;
    case SegmentKind::Chord: return 0;
  }
  return 0;
}

double ArcSegment::value(double x) const {
  if (kind == SegmentKind::Chord) {
    if (b == a) return ya;
    return ya + (yb - ya) * ((x - a) / (b - a));
  }
  const double dx = x - xc;
  const double root = std::sqrt(std::max(0.0, radius * radius - dx * dx));
  return kind == SegmentKind::Connector ? yc + root : yc - root;
}

double ArcSegment::slope(double x) const {
  if (kind == SegmentKind::Chord) return b == a ? 0.0 : (yb - ya) / (b - a);
  const double dx = x - xc;
  const double root = std::sqrt(std::max(0.0, radius * radius - dx * dx));
  return kind == SegmentKind::Connector ? -dx / root : dx / root;
}

double ArcSegment::curvature() const {
  if (kind == SegmentKind::Chord) return 0.0;
  return static_cast<double>(concavity()) / radius;
}

double cap_slope(double r, double f_in) {
  if (f_in == 0.0) return 0.0;
  return r / std::sqrt(1.0 / (f_in * f_in) - r * r);
}

std::optional<ArcSegment> obstacle_cap(const Point& center, double r, double f_in) {
  if (!(r > 0.0) || !(f_in >= 0.0)) throw ValidationError("obstacle_cap needs r > 0 and f_in >= 0");
  ArcSegment seg;
  seg.a = center.x - r;
  seg.b = center.x + r;
  seg.ya = center.y;
  seg.yb = center.y;
  if (f_in == 0.0) {
    seg.kind = SegmentKind::Chord;
    return seg;
  }
  if (f_in * r >= 1.0) return std::nullopt;
  const double radius = 1.0 / f_in;
  const double slope = cap_slope(r, f_in);
  if (!std::isfinite(slope)) return std::nullopt;
  seg.kind = SegmentKind::Cap;
  seg.radius = radius;
  seg.xc = center.x;
  seg.yc = center.y + std::sqrt(radius * radius - r * r);
  return seg;
}

std::optional<ArcSegment> arc_connect(const Point& p1, const Point& p2, double kappa, double alpha) {
  if (!(p2.x > p1.x)) throw ValidationError("arc_connect needs p1.x < p2.x");
  if (!(kappa >= 0.0) || !(alpha >= 0.0)) {
    throw ValidationError("arc_connect needs kappa >= 0 and alpha >= 0");
  }
  const double xbar = p2.x - p1.x;
  const double ybar = p2.y - p1.y;
  const double c2 = xbar * xbar + ybar * ybar;
  ArcSegment seg;
  seg.a = p1.x;
  seg.b = p2.x;
  seg.ya = p1.y;
  seg.yb = p2.y;
  if (kappa == 0.0) {
    if (std::abs(ybar) > alpha * xbar) return std::nullopt;
    seg.kind = SegmentKind::Chord;
    return seg;
  }
  if (kappa > 2.0 * xbar / c2) return std::nullopt;
  const double lhs = alpha / std::sqrt(1.0 + alpha * alpha);
  const double rhs =
      0.5 * kappa * xbar + std::abs(ybar) * std::sqrt(std::max(0.0, 1.0 / c2 - 0.25 * kappa * kappa));
  if (lhs < rhs) return std::nullopt;

  const double radius = 1.0 / kappa;
  const double c = std::sqrt(c2);
  const double q = std::sqrt(std::max(0.0, radius * radius - 0.25 * c2));
  seg.kind = SegmentKind::Connector;
  seg.radius = radius;
  seg.xc = p1.x + 0.5 * xbar + q * ybar / c;
  seg.yc = p1.y + 0.5 * ybar - q * xbar / c;
  return seg;
}

std::optional<std::vector<int>> minimal_lipschitz_selection(
    const std::vector<std::vector<bool>>& occupied, bool periodic) {
  const auto columns = static_cast<int>(occupied.size());
  if (columns == 0) return std::vector<int>{};
  const auto rows = static_cast<int>(occupied.front().size());
  std::vector<int> sel(columns, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < columns; ++k) {
      const auto& col = occupied[k];
      while (sel[k] < rows && !col[sel[k]]) {
        ++sel[k];
        changed = true;
      }
      if (sel[k] >= rows) return std::nullopt;
      for (int side : {-1, 1}) {
        int nb = k + side;
        if (nb < 0 || nb >= columns) {
          if (!periodic) continue;
          nb = (nb + columns) % columns;
        }
        if (sel[k] < sel[nb] - 1) {
          sel[k] = sel[nb] - 1;
          changed = true;
        }
      }
    }
  }
  return sel;
}

Rect SelectionGrid::box(int column, int row) const {
  const double left = period * column;
  return Rect{left + r1, left + l - r1, y0 + h * row, y0 + h * (row + 1)};
}

std::optional<std::vector<int>> find_lipschitz_selection(const ObstacleField& field,
                                                         const SelectionGrid& grid) {
  const double top = grid.y0 + grid.h * grid.rows;
  if (field.domain().y_max < top || field.domain().y_min > grid.y0) {
    throw OutOfBand("selection grid leaves the generated band");
  }
  std::vector<std::vector<bool>> occupied(grid.columns, std::vector<bool>(grid.rows, false));
  for (int k = 0; k < grid.columns; ++k) {
    for (int j = 0; j < grid.rows; ++j) {
      occupied[k][j] = !field.centers_in(grid.box(k, j)).empty();
    }
  }
  return minimal_lipschitz_selection(occupied, true);
}

BarrierGeometry barrier_geometry(const ObstacleParams& params, double width, double h_scale,
                                 const BarrierConfig& cfg) {
  params.validate();
  if (!(cfg.p_c > 0.0 && cfg.p_c < 1.0)) throw ValidationError("p_c must lie in (0, 1)");
  BarrierGeometry g;
  g.p_c = cfg.p_c;
  g.h_scale = h_scale;
  g.f_in = 0.5 * params.f;
  g.r = params.f > 0.0 ? std::min(params.r0, 2.0 / params.f) : params.r0;
  g.c0 = -std::log(1.0 - cfg.p_c) / params.rho;
  g.h = std::sqrt(2.0) * std::sqrt(g.f_in * g.r * g.c0) * h_scale;
  g.alpha = cap_slope(g.r, g.f_in);
  if (g.h > 0.0) {
    g.d = 2.0 * g.c0 / g.h;
    g.l = g.c0 / g.h + 2.0 * params.r1;
    g.f_out = g.f_in * g.r * g.h / (4.0 * g.c0);
  }
  SelectionGrid& grid = g.grid;
  grid.columns = g.h > 0.0 ? std::max(1, static_cast<int>(std::floor(width / (g.l + g.d)))) : 1;
  grid.period = width / grid.columns;
  grid.l = g.l;
  grid.h = g.h;
  grid.rows = cfg.j_max;
  grid.y0 = params.r1;
  grid.r1 = params.r1;
  return g;
}

double Barrier::value(double x) const {
  const double start = segments.front().a;
  double xs = x - width * std::floor((x - start) / width);
  if (xs >= start + width) xs -= width;
  auto it = std::upper_bound(segments.begin(), segments.end(), xs,
                             [](double v, const ArcSegment& s) { return v < s.a; });
  if (it != segments.begin()) --it;
  return it->value(std::clamp(xs, it->a, it->b));
}

double Barrier::min_height() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : segments) {
    lo = std::min({lo, s.value(s.a), s.value(s.b)});
    if (s.kind == SegmentKind::Cap && s.xc > s.a && s.xc < s.b) lo = std::min(lo, s.value(s.xc));
  }
  return lo;
}

std::optional<Barrier> assemble_barrier(ObstacleField& field, const BarrierGeometry& g) {
  const auto& p = field.params();
  if (!(g.h > 0.0) || g.f_in * g.r >= 1.0) return std::nullopt;
  const SelectionGrid& grid = g.grid;
  if (!(grid.l - 2.0 * grid.r1 > 0.0) || grid.l > grid.period) return std::nullopt;
  const double top = grid.y0 + grid.h * grid.rows;
  if (field.mode() == ObstacleField::Mode::Generated) field.ensure_band(grid.y0 - p.r1, top);
  if (!field.covers(grid.y0 - p.r1, top)) return std::nullopt;

  auto selection = find_lipschitz_selection(field, grid);
  if (!selection) return std::nullopt;

  Barrier barrier;
  barrier.geometry = g;
  barrier.selection = *selection;
  barrier.width = field.domain().width;
  const auto centers = field.centers();
  for (int k = 0; k < grid.columns; ++k) {
    const auto idx = field.centers_in(grid.box(k, barrier.selection[k]));
    const Point* best = nullptr;
    for (std::size_t i : idx) {
      const Point& c = centers[i];
      if (best == nullptr || c.y < best->y || (c.y == best->y && c.x < best->x)) best = &c;
    }
    barrier.anchors.push_back(*best);
  }
  // Anchors come out ordered in x because the boxes are disjoint in [0, width).
  const auto K = barrier.anchors.size();
  for (std::size_t k = 0; k < K; ++k) {
    const Point& here = barrier.anchors[k];
    Point next = barrier.anchors[(k + 1) % K];
    if (k + 1 == K) next.x += barrier.width;
    auto cap = obstacle_cap(here, g.r, g.f_in);
    if (!cap) return std::nullopt;
    auto conn = arc_connect({here.x + g.r, here.y}, {next.x - g.r, next.y}, g.f_out, g.alpha);
    if (!conn) return std::nullopt;
    barrier.segments.push_back(*cap);
    barrier.segments.push_back(*conn);
  }
  const auto n = barrier.segments.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ArcSegment& left = barrier.segments[i];
    ArcSegment right = barrier.segments[(i + 1) % n];
    if (i + 1 == n) {
      right.a += barrier.width;
      right.b += barrier.width;
      right.xc += barrier.width;
    }
    Junction j;
    j.x = left.b;
    j.y = left.value(left.b);
    j.left_slope = left.slope(left.b);
    j.right_slope = right.slope(right.a);
    j.gap = std::abs(j.y - right.value(right.a));
    barrier.junctions.push_back(j);
  }
  const double lo = barrier.min_height();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : barrier.segments) {
    hi = std::max({hi, s.value(s.a), s.value(s.b)});
    if (s.kind == SegmentKind::Connector && s.xc > s.a && s.xc < s.b) hi = std::max(hi, s.value(s.xc));
  }
  if (field.mode() == ObstacleField::Mode::Generated) field.ensure_band(lo, hi);
  return barrier;
}

ResidualReport verify_supersolution(const Barrier& barrier, const ObstacleField& field,
                                    double margin, const BarrierConfig& cfg) {
  ResidualReport rep;
  rep.min_residual = std::numeric_limits<double>::infinity();
  rep.concavity_margin = std::numeric_limits<double>::infinity();
  if (barrier.segments.empty()) {
    rep.failure = "empty barrier";
    return rep;
  }
  const std::size_t n = std::max<std::size_t>(cfg.samples_per_segment, 2);
  constexpr int kRefine = 16;
  std::vector<double> xs;
  for (std::size_t si = 0; si < barrier.segments.size(); ++si) {
    const ArcSegment& seg = barrier.segments[si];
    const double len = seg.b - seg.a;
    xs.clear();
    for (std::size_t j = 0; j < n; ++j) {
      xs.push_back(seg.a + len * static_cast<double>(j) / static_cast<double>(n - 1));
    }
    // Refinement pass toward both ends, where the arcs meet the caps.
    for (int j = 1; j <= kRefine; ++j) {
      const double off = len / static_cast<double>(n - 1) * std::ldexp(1.0, -j);
      xs.push_back(seg.a + off);
      xs.push_back(seg.b - off);
    }
    for (double x : xs) {
      const double y = seg.value(x);
      if (!field.covers(y, y)) {
        rep.failure = "barrier leaves the generated band";
        return rep;
      }
      const double residual = -seg.curvature() + field.phi(x, y) - margin;
      ++rep.samples;
      if (residual < rep.min_residual) {
        rep.min_residual = residual;
        rep.min_residual_x = x;
        rep.min_residual_y = y;
        rep.min_residual_segment = si;
      }
    }
  }
  for (const Junction& j : barrier.junctions) {
    rep.concavity_margin = std::min(rep.concavity_margin, j.left_slope - j.right_slope);
    rep.max_gap = std::max(rep.max_gap, j.gap);
  }
  constexpr double kGapTolerance = 1e-10;
  std::ostringstream why;
  if (rep.min_residual < -cfg.tolerance) {
    why << "residual " << rep.min_residual << " at x=" << rep.min_residual_x
        << " on segment " << rep.min_residual_segment;
  } else if (rep.concavity_margin < -cfg.tolerance) {
    why << "convex corner, slope jump " << rep.concavity_margin;
  } else if (rep.max_gap > kGapTolerance) {
    why << "discontinuity " << rep.max_gap;
  }
  rep.failure = why.str();
  rep.ok = rep.failure.empty();
  return rep;
}

std::optional<LowerCert> build_barrier(ObstacleField& field, double F, double tau,
                                       const BarrierConfig& cfg) {
  if (!(F >= tau)) throw ValidationError("build_barrier needs F >= tau");
  const double margin = F - tau;
  for (double scale : cfg.h_scales) {
    const auto geometry = barrier_geometry(field.params(), field.domain().width, scale, cfg);
    auto barrier = assemble_barrier(field, geometry);
    if (!barrier || !(barrier->min_height() > 0.0)) continue;
    auto report = verify_supersolution(*barrier, field, margin, cfg);
    if (!report.ok) continue;
    return LowerCert{F, margin, std::move(*barrier), std::move(report)};
  }
  return std::nullopt;
}

std::optional<LowerCert> best_lower_certificate(ObstacleField& field, double tau,
                                                const BarrierConfig& cfg, double rel_tol) {
  const double f = field.params().f;
  if (!build_barrier(field, tau, tau, cfg)) return std::nullopt;
  if (auto top = build_barrier(field, tau + f, tau, cfg)) return top;
  double lo = 0.0;
  double hi = f;
  const double tol = std::max(rel_tol * f, std::numeric_limits<double>::min());
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (build_barrier(field, tau + mid, tau, cfg)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return build_barrier(field, tau + lo, tau, cfg);
}

namespace {

// Euclidean distance^2 from p to the closed cube, periodic in x.
double cube_distance_sq(const Point& p, double x0, double x1, double y0, double y1, double width) {
  double best = std::numeric_limits<double>::infinity();
  for (double shift : {-width, 0.0, width}) {
    const double x = p.x + shift;
    const double dx = std::max({0.0, x0 - x, x - x1});
    best = std::min(best, dx * dx);
  }
  const double dy = std::max({0.0, y0 - p.y, p.y - y1});
  return best + dy * dy;
}

std::optional<PathCert> search_path(ObstacleField& field, int m, double height, double tau) {
  const double W = field.domain().width;
  const double r1 = field.params().r1;
  const double h = W / m;
  const int rows = std::max(1, static_cast<int>(std::ceil(height / h)));
  const double top = h * rows;
  if (field.mode() == ObstacleField::Mode::Generated) field.ensure_band(0.0, top);
  if (!field.covers(0.0, top)) throw OutOfBand("path search region leaves the fixed band");

  std::vector<char> blocked(static_cast<std::size_t>(m) * rows, 0);
  const double r1sq = r1 * r1;
  for (const Point& c : field.centers()) {
    if (c.y < -r1 || c.y > top + r1) continue;
    const int j_lo = std::max(0, static_cast<int>(std::floor((c.y - r1) / h)));
    const int j_hi = std::min(rows - 1, static_cast<int>(std::floor((c.y + r1) / h)));
    const int i_lo = static_cast<int>(std::floor((c.x - r1) / h));
    const int i_hi = static_cast<int>(std::floor((c.x + r1) / h));
    for (int j = j_lo; j <= j_hi; ++j) {
      for (int i = i_lo; i <= i_hi; ++i) {
        const int col = ((i % m) + m) % m;
        const double d2 = cube_distance_sq(c, h * col, h * (col + 1), h * j, h * (j + 1), W);
        if (d2 <= r1sq) blocked[static_cast<std::size_t>(j) * m + col] = 1;
      }
    }
  }

  std::vector<int> parent(blocked.size(), -2);
  std::deque<int> queue;
  for (int i = 0; i < m; ++i) {
    if (!blocked[i]) {
      parent[i] = -1;
      queue.push_back(i);
    }
  }
  int goal = -1;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const int row = cur / m;
    const int col = cur % m;
    if (row == rows - 1) {
      goal = cur;
      break;
    }
    const int next[3] = {row * m + (col + m - 1) % m, row * m + (col + 1) % m, (row + 1) * m + col};
    for (int nb : next) {
      if (nb == cur || blocked[nb] || parent[nb] != -2) continue;
      parent[nb] = cur;
      queue.push_back(nb);
    }
  }
  if (goal < 0) return std::nullopt;
  PathCert path;
  path.h = h;
  path.columns = m;
  path.rows = rows;
  path.f_ub = tau + 2.0 / h;
  for (int cur = goal; cur >= 0; cur = parent[cur]) path.cubes.push_back({cur % m, cur / m});
  std::reverse(path.cubes.begin(), path.cubes.end());
  return path;
}

}  // namespace

bool cube_is_free(const ObstacleField& field, double h, const Cube& cube) {
  const double r1 = field.params().r1;
  const double W = field.domain().width;
  for (const Point& c : field.centers()) {
    const double d2 = cube_distance_sq(c, h * cube.col, h * (cube.col + 1), h * cube.row,
                                       h * (cube.row + 1), W);
    if (d2 <= r1 * r1) return false;
  }
  return true;
}

bool cross_is_empty(const ObstacleField& field, double h, const Cube& cube) {
  const int offsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (const auto& o : offsets) {
    const double x0 = h * (cube.col + o[0]);
    const double y0 = h * (cube.row + o[1]);
    if (!field.centers_in(Rect{x0, x0 + h, y0, y0 + h}).empty()) return false;
  }
  return true;
}

std::optional<PathCert> find_free_path(ObstacleField& field, double h, double height, double tau) {
  const double W = field.domain().width;
  if (!(h > 0.0) || !(height > 0.0)) throw ValidationError("find_free_path needs h > 0 and height > 0");
  const int m = std::max(1, static_cast<int>(std::floor(W / h)));
  return search_path(field, m, height, tau);
}

std::optional<PathCert> best_free_path(ObstacleField& field, double h_min, double height,
                                       double tau) {
  if (!(h_min > 0.0)) throw ValidationError("best_free_path needs h_min > 0");
  const double W = field.domain().width;
  for (int m = 1; W / m >= h_min; ++m) {
    if (auto path = search_path(field, m, height, tau)) return path;
  }
  return std::nullopt;
}

bool recheck_path(const ObstacleField& field, const PathCert& path) {
  if (path.cubes.empty() || path.columns < 1) return false;
  if (path.cubes.front().row != 0 || path.cubes.back().row != path.rows - 1) return false;
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < path.cubes.size(); ++k) {
    const Cube& c = path.cubes[k];
    if (c.col < 0 || c.col >= path.columns || c.row < 0 || c.row >= path.rows) return false;
    if (!seen.insert({c.col, c.row}).second) return false;
    if (k > 0) {
      const Cube& prev = path.cubes[k - 1];
      const bool up = c.row == prev.row + 1 && c.col == prev.col;
      const bool side = c.row == prev.row && (c.col == (prev.col + 1) % path.columns ||
                                              c.col == (prev.col + path.columns - 1) % path.columns);
      if (!up && !side) return false;
    }
    if (!cube_is_free(field, path.h, c)) return false;
  }
  return true;
}

double bulge_curvature(double t, double v0, double h) {
  const double a = 0.5 * h;
  const double s = v0 * t;
  return 2.0 * s / (s * s + a * a);
}

EvolutionReport construct_path_evolution(double h, double F, double v0, double epsilon, double tau,
                                         std::size_t samples_per_curve, std::size_t time_samples) {
  if (!(h > 0.0) || !(v0 > 0.0) || !(epsilon > 0.0) || !(tau >= 0.0)) {
    throw ValidationError("path evolution needs h > 0, v0 > 0, epsilon > 0, tau >= 0");
  }
  if (!(epsilon * v0 + tau <= F - 2.0 / h)) {
    throw ValidationError("path evolution needs epsilon * v0 + tau <= F - 2 / h");
  }
  samples_per_curve = std::max<std::size_t>(samples_per_curve, 3);
  time_samples = std::max<std::size_t>(time_samples, 1);
  const double a = 0.5 * h;
  EvolutionReport rep;
  rep.t_contact = a / v0;
  rep.kappa_at_contact = bulge_curvature(rep.t_contact, v0, h);
  rep.min_margin = std::numeric_limits<double>::infinity();

  auto record = [&](int phase, double t, double x, double y, double vn, double kappa) {
    const double margin = kappa + F - (epsilon * vn + tau);
    rep.samples.push_back({phase, t, x, y, vn, kappa, margin});
    rep.min_margin = std::min(rep.min_margin, margin);
  };
  const auto last = static_cast<double>(samples_per_curve - 1);

  // Bulge: circles through (+-a, 0) whose apex rises at speed v0.
  for (std::size_t k = 1; k <= time_samples; ++k) {
    const double t = rep.t_contact * static_cast<double>(k) / static_cast<double>(time_samples);
    const double kappa = bulge_curvature(t, v0, h);
    const double R = 1.0 / kappa;
    const double foot = std::sqrt(std::max(0.0, R * R - a * a));
    for (std::size_t i = 0; i < samples_per_curve; ++i) {
      const double x = -a + h * static_cast<double>(i) / last;
      const double y = std::max(0.0, a * a - x * x) / (std::sqrt(std::max(0.0, R * R - x * x)) + foot);
      record(0, t, x, y, y / t, -kappa);
    }
  }
  // Translation: half disc of radius a moving up between the cube walls.
  const double t_cube = h / v0;
  for (std::size_t k = 0; k <= time_samples; ++k) {
    const double t = rep.t_contact + t_cube * static_cast<double>(k) / static_cast<double>(time_samples);
    const double base = v0 * (t - rep.t_contact);
    for (std::size_t i = 0; i < samples_per_curve; ++i) {
      const double theta = std::numbers::pi * static_cast<double>(i) / last;
      const double x = a * std::cos(theta);
      const double y = base + a * std::sin(theta);
      record(1, t, x, y, v0 * std::sin(theta), -1.0 / a);
    }
    record(1, t, -a, base, 0.0, 0.0);
    record(1, t, a, base, 0.0, 0.0);
  }
  // Turn: the half disc faces sideways and a flat cap closes the channel.
  for (std::size_t k = 0; k <= time_samples; ++k) {
    const double t = rep.t_contact + t_cube * (1.0 + static_cast<double>(k) / static_cast<double>(time_samples));
    const double shift = v0 * (t - rep.t_contact - t_cube);
    for (std::size_t i = 0; i < samples_per_curve; ++i) {
      const double theta = std::numbers::pi * (static_cast<double>(i) / last - 0.5);
      const double x = shift + a * std::cos(theta);
      const double y = a + a * std::sin(theta);
      record(2, t, x, y, v0 * std::cos(theta), -1.0 / a);
    }
    record(2, t, shift - a, h, 0.0, 0.0);
  }
  rep.ok = rep.min_margin >= -1e-12;
  return rep;
}

double lower_bound_constant(double r0, double f) {
  const double f_in = 0.5 * f;
  const double r = f > 0.0 ? std::min(r0, 2.0 / f) : r0;
  return std::sqrt(2.0) * std::pow(f_in * r, 1.5) / (4.0 * std::sqrt(std::log(16.0)));
}

AnalyticBounds analytic_bounds(const ObstacleParams& params, double tau, double p_c) {
  params.validate();
  if (!(p_c > 0.0 && p_c < 1.0)) throw ValidationError("p_c must lie in (0, 1)");
  const double sr = std::sqrt(params.rho);
  AnalyticBounds b;
  b.f_lb = tau + std::min(lower_bound_constant(params.r0, params.f) * sr, 0.5 * params.f);
  b.f_ub = tau + 4.0 * sr / std::sqrt(-std::log(p_c) / 5.0);
  return b;
}

json to_json(const ArcSegment& seg) {
  json j{{"kind", to_string(seg.kind)}, {"a", seg.a}, {"b", seg.b}, {"ya", seg.ya}, {"yb", seg.yb}};
  if (seg.kind != SegmentKind::Chord) {
    j["center"] = {seg.xc, seg.yc};
    j["radius"] = seg.radius;
  }
  j["concavity"] = seg.concavity();
  return j;
}

json to_json(const LowerCert& cert) {
  const auto& g = cert.barrier.geometry;
  json segments = json::array();
  for (const auto& s : cert.barrier.segments) segments.push_back(to_json(s));
  json junctions = json::array();
  for (const auto& j : cert.barrier.junctions) {
    junctions.push_back({{"x", j.x}, {"y", j.y}, {"left_slope", j.left_slope},
                         {"right_slope", j.right_slope}, {"gap", j.gap}});
  }
  json anchors = json::array();
  for (const auto& p : cert.barrier.anchors) anchors.push_back({p.x, p.y});
  return json{
      {"type", "lower"},
      {"F_certified", cert.f_certified},
      {"margin", cert.margin},
      {"geometry",
       {{"h", g.h}, {"d", g.d}, {"l", g.l}, {"C0", g.c0}, {"F_out", g.f_out}, {"F_in", g.f_in},
        {"r", g.r}, {"alpha", g.alpha}, {"p_c", g.p_c}, {"h_scale", g.h_scale},
        {"columns", g.grid.columns}, {"period", g.grid.period}, {"y0", g.grid.y0}}},
      {"selection", cert.barrier.selection},
      {"anchors", anchors},
      {"segments", segments},
      {"junctions", junctions},
      {"min_height", cert.barrier.min_height()},
      {"residual",
       {{"ok", cert.report.ok}, {"min", cert.report.min_residual},
        {"at", {cert.report.min_residual_x, cert.report.min_residual_y}},
        {"concavity_margin", cert.report.concavity_margin}, {"max_gap", cert.report.max_gap},
        {"samples", cert.report.samples}}}};
}

json to_json(const PathCert& path) {
  json cubes = json::array();
  for (const auto& c : path.cubes) cubes.push_back({c.col, c.row});
  return json{{"type", "upper"}, {"h", path.h},         {"columns", path.columns},
              {"rows", path.rows}, {"F_ub", path.f_ub}, {"v0", path.v0},
              {"cubes", cubes}};
}

json to_json(const EvolutionReport& report, bool with_samples) {
  json j{{"ok", report.ok},
         {"min_margin", report.min_margin},
         {"kappa_at_contact", report.kappa_at_contact},
         {"t_contact", report.t_contact},
         {"sample_count", report.samples.size()}};
  if (with_samples) {
    json s = json::array();
    for (const auto& e : report.samples) {
      s.push_back({e.phase, e.t, e.x, e.y, e.normal_velocity, e.curvature, e.margin});
    }
    j["samples"] = s;
  }
  return j;
}

}  // namespace depin
