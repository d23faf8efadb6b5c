#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "depin/certificates.hpp"
#include "depin/errors.hpp"
#include "oracles.hpp"

using namespace depin;

namespace {

ObstacleField lattice_field(const ObstacleParams& p, double width, double step, double y_top) {
  std::vector<Point> pts;
  const int nx = static_cast<int>(std::round(width / step));
  for (int i = 0; i < nx; ++i)
    for (double y = -1.0; y < y_top; y += step) pts.push_back({(i + 0.5) * step, y});
  return ObstacleField::with_centers(p, width, pts);
}

}  // namespace

TEST_CASE("obstacle cap closed forms") {
  auto cap = obstacle_cap({0.0, 0.0}, 1.0, 0.5);
  REQUIRE(cap);
  CHECK(cap->value(0.0) == doctest::Approx(-2.0 + std::sqrt(3.0)).epsilon(1e-14));
  CHECK(cap->slope(1.0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(cap->slope(-1.0) == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(cap->curvature() == 0.5);
  CHECK(cap_slope(1.0, 0.5) == doctest::Approx(1.0 / std::sqrt(3.0)));

  auto flat = obstacle_cap({0.0, 2.0}, 1.0, 0.0);
  REQUIRE(flat);
  CHECK(flat->kind == SegmentKind::Chord);
  CHECK(flat->slope(0.5) == 0.0);
  CHECK(flat->value(0.3) == 2.0);

  CHECK_FALSE(obstacle_cap({0.0, 0.0}, 1.0, 1.0));
  CHECK_FALSE(obstacle_cap({0.0, 0.0}, 1.0, 1.5));
}

TEST_CASE("connecting arcs") {
  const double alpha_min = 0.25 / std::sqrt(1.0 - 0.0625);
  CHECK(arc_connect({0, 0}, {1, 0}, 0.5, alpha_min * 1.0001));
  CHECK_FALSE(arc_connect({0, 0}, {1, 0}, 0.5, alpha_min * 0.9999));
  auto arc = arc_connect({0, 0}, {1, 0}, 0.5, 1.0);
  REQUIRE(arc);
  CHECK(std::abs(arc->value(0.0)) <= 1e-12);
  CHECK(std::abs(arc->value(1.0)) <= 1e-12);
  CHECK(arc->curvature() == -0.5);
  // Apex at the midpoint; the maximum is reached there.
  CHECK(std::abs(arc->slope(0.5)) <= 1e-12);
  CHECK(arc->slope(0.0) == doctest::Approx(0.25 / std::sqrt(1.0 - 0.0625)));

  auto chord = arc_connect({0, 0}, {2, 1}, 0.0, 1.0);
  REQUIRE(chord);
  CHECK(chord->kind == SegmentKind::Chord);
  CHECK(chord->value(1.0) == doctest::Approx(0.5));

  CHECK_FALSE(arc_connect({0, 0}, {1, 1}, 1.5, 10.0));
  CHECK_THROWS_AS(arc_connect({1, 0}, {1, 2}, 0.5, 1.0), ValidationError);

  // Sloped arc: endpoints and curvature from second differences.
  auto tilted = arc_connect({0.3, 0.1}, {1.7, 0.45}, 0.4, 2.0);
  REQUIRE(tilted);
  CHECK(std::abs(tilted->value(0.3) - 0.1) <= 1e-12);
  CHECK(std::abs(tilted->value(1.7) - 0.45) <= 1e-12);
  const double dx = 1.4 / 512;
  for (int i = 1; i < 512; ++i) {
    const double x = 0.3 + i * dx;
    const double u1 = (tilted->value(x + dx) - tilted->value(x - dx)) / (2 * dx);
    const double u2 = (tilted->value(x + dx) - 2 * tilted->value(x) + tilted->value(x - dx)) / (dx * dx);
    CHECK(std::abs(u2 / std::pow(1 + u1 * u1, 1.5) + 0.4) <= 1e-6 * 50);
  }
}

TEST_CASE("minimal Lipschitz selection") {
  using Grid = std::vector<std::vector<bool>>;
  SUBCASE("all occupied") {
    Grid g(5, std::vector<bool>(4, true));
    CHECK(*minimal_lipschitz_selection(g, true) == std::vector<int>(5, 0));
  }
  SUBCASE("one column empty at the bottom row") {
    Grid g(5, std::vector<bool>(4, true));
    g[2][0] = false;
    auto sel = minimal_lipschitz_selection(g, false);
    REQUIRE(sel);
    CHECK(*sel == std::vector<int>{0, 0, 1, 0, 0});
    CHECK(sel == testing::exhaustive_minimal_selection(g, false));
  }
  SUBCASE("propagation through a staircase") {
    Grid g(6, std::vector<bool>(6, false));
    for (int k = 0; k < 6; ++k) g[k][5] = true;
    for (int k = 0; k < 6; ++k) g[k][0] = (k != 3);
    auto sel = minimal_lipschitz_selection(g, true);
    REQUIRE(sel);
    CHECK(sel == testing::exhaustive_minimal_selection(g, true));
    CHECK((*sel)[3] == 5);
  }
  SUBCASE("empty column gives none") {
    Grid g(4, std::vector<bool>(3, true));
    g[1] = {false, false, false};
    CHECK_FALSE(minimal_lipschitz_selection(g, true));
  }
  SUBCASE("random patterns agree with exhaustive search") {
    CounterRng rng(4);
    for (int c = 0; c < 200; ++c) {
      Grid g(8, std::vector<bool>(6));
      const double p = rng.uniform(0.2, 0.8);
      for (auto& col : g)
        for (std::size_t r = 0; r < col.size(); ++r) col[r] = rng.uniform() < p;
      const bool periodic = c % 2 == 0;
      REQUIRE(minimal_lipschitz_selection(g, periodic) ==
              testing::exhaustive_minimal_selection(g, periodic));
    }
  }
}

TEST_CASE("selection on a field with an empty slab is absent") {
  ObstacleParams p{1.0, 0.1, 0.2, 2.0, 0};
  auto g = barrier_geometry(p, 20.0, 1.0);
  auto field = ObstacleField::with_centers(p, 20.0, {{1.0, 1e6}});
  CHECK_FALSE(find_lipschitz_selection(field, g.grid));
}

TEST_CASE("barrier geometry recipe") {
  ObstacleParams p{2.0, 0.1, 0.2, 2.0, 0};
  auto g = barrier_geometry(p, 17.0, 1.0);
  CHECK(g.f_in == 1.0);
  CHECK(g.r == 0.1);
  CHECK(g.c0 == doctest::Approx(std::log(16.0) / 2.0));
  CHECK(g.h == doctest::Approx(std::sqrt(2.0 * g.f_in * g.r * g.c0)));
  CHECK(g.d == doctest::Approx(2.0 * g.c0 / g.h));
  CHECK(g.f_out == doctest::Approx(g.f_in * g.r * g.h / (4.0 * g.c0)));
  CHECK(g.grid.columns * (g.l + g.d) <= 17.0);
  // Strong obstacles: r switches to 2 / f.
  ObstacleParams strong{2.0, 0.1, 0.2, 40.0, 0};
  CHECK(barrier_geometry(strong, 17.0, 1.0).r == doctest::Approx(0.05));
}

TEST_CASE("barrier on a dense lattice of obstacles") {
  ObstacleParams p{4.0, 0.1, 0.2, 2.0, 0};
  auto field = lattice_field(p, 8.0, 0.5, 40.0);
  auto cert = build_barrier(field, 0.001, 0.0);
  REQUIRE(cert);
  CHECK(cert->report.ok);
  CHECK(cert->report.min_residual >= -1e-12);
  CHECK(cert->barrier.min_height() > 0.0);

  // Independent denser resampling of the residual.
  BarrierConfig dense;
  dense.samples_per_segment = 1025;
  CHECK(verify_supersolution(cert->barrier, field, cert->margin, dense).min_residual >= -1e-10);
  double worst = INFINITY;
  const auto& b = cert->barrier;
  for (int i = 0; i < 20000; ++i) {
    const double x = b.segments.front().a + b.width * (i + 0.5) / 20000.0;
    for (const auto& s : b.segments) {
      if (x < s.a || x > s.b) continue;
      worst = std::min(worst, -s.curvature() + field.phi(x, s.value(x)) - cert->margin);
    }
  }
  CHECK(worst >= -1e-10);
  // Concave corners and continuity.
  for (const auto& j : b.junctions) {
    CHECK(j.left_slope >= j.right_slope - 1e-12);
    CHECK(j.gap <= 1e-10);
  }

  CHECK_FALSE(build_barrier(field, p.f + 0.01, 0.0));
  auto best = best_lower_certificate(field, 0.0);
  REQUIRE(best);
  CHECK(best->f_certified >= 0.001);
  CHECK(best->f_certified <= p.f / 2);
}

TEST_CASE("no barrier without obstacles") {
  ObstacleParams p{1.0, 0.1, 0.2, 2.0, 0};
  auto field = ObstacleField::with_centers(p, 10.0, {});
  CHECK_FALSE(build_barrier(field, 0.0, 0.0));
  CHECK_FALSE(best_lower_certificate(field, 0.0));
}

TEST_CASE("supersolution residual cases") {
  ObstacleParams p{1.0, 0.1, 0.2, 8.0, 0};
  auto field = ObstacleField::with_centers(p, 4.0, {{1.0, 1.0}, {3.0, 1.0}});
  const double f_in = 5.0, r = 0.1, margin = 0.25;
  Barrier b;
  b.width = 4.0;
  const double alpha = cap_slope(r, f_in);
  for (double cx : {1.0, 3.0}) {
    auto cap = obstacle_cap({cx, 1.0}, r, f_in);
    const double next = cx == 1.0 ? 3.0 : 5.0;
    auto conn = arc_connect({cx + r, 1.0}, {next - r, 1.0}, margin, alpha);
    REQUIRE(cap);
    REQUIRE(conn);
    b.segments.push_back(*cap);
    b.segments.push_back(*conn);
  }
  for (std::size_t i = 0; i < b.segments.size(); ++i) {
    const auto& l = b.segments[i];
    const auto& rgt = b.segments[(i + 1) % b.segments.size()];
    b.junctions.push_back({l.b, l.value(l.b), l.slope(l.b), rgt.slope(rgt.a), 0.0});
  }
  auto rep = verify_supersolution(b, field, margin);
  // Connectors have curvature exactly the margin: the minimum is zero there.
  CHECK(rep.ok);
  CHECK(std::abs(rep.min_residual) <= 1e-12);
  // Cap sits inside phi == f: residual f - f_in - margin.
  Barrier caps_only = b;
  caps_only.segments = {b.segments[0]};
  caps_only.junctions.clear();
  CHECK(verify_supersolution(caps_only, field, margin).min_residual ==
        doctest::Approx(p.f - f_in - margin));
  // Convex kink is rejected.
  Barrier kinked = b;
  kinked.junctions[0].left_slope = 0.3;
  kinked.junctions[0].right_slope = 0.5;
  auto bad = verify_supersolution(kinked, field, margin);
  CHECK_FALSE(bad.ok);
  CHECK(bad.failure.find("convex") != std::string::npos);
  // Too large a margin fails on the connectors.
  CHECK_FALSE(verify_supersolution(b, field, margin + 1e-6).ok);
}

TEST_CASE("free paths") {
  ObstacleParams p{1.0, 0.1, 0.2, 2.0, 0};
  SUBCASE("empty field") {
    auto field = ObstacleField::with_centers(p, 8.0, {});
    auto path = find_free_path(field, 1.0, 5.0, 0.3);
    REQUIRE(path);
    CHECK(path->f_ub == doctest::Approx(0.3 + 2.0));
    CHECK(path->cubes.size() == 5);
    for (std::size_t k = 0; k < path->cubes.size(); ++k) {
      CHECK(path->cubes[k].col == path->cubes.front().col);
      CHECK(path->cubes[k].row == static_cast<int>(k));
    }
    CHECK(recheck_path(field, *path));
    auto best = best_free_path(field, 0.5, 5.0, 0.0);
    REQUIRE(best);
    CHECK(best->h == 8.0);
  }
  SUBCASE("wall blocks every path") {
    std::vector<Point> wall;
    for (int k = 0; k < 40; ++k) wall.push_back({0.2 * k, 2.5});
    auto field = ObstacleField::with_centers(p, 8.0, wall);
    CHECK_FALSE(find_free_path(field, 0.5, 5.0, 0.0));
    CHECK_FALSE(best_free_path(field, 0.25, 5.0, 0.0));
  }
  SUBCASE("returned paths pass the brute force recheck") {
    for (int s = 0; s < 10; ++s) {
      ObstacleField field({1.0, 0.1, 0.2, 2.0, static_cast<std::uint64_t>(s)}, 10.0);
      auto path = best_free_path(field, 0.3, 6.0, 0.0);
      REQUIRE(path);
      CHECK(recheck_path(field, *path));
      PathCert broken = *path;
      broken.cubes.erase(broken.cubes.begin() + static_cast<long>(broken.cubes.size() / 2));
      CHECK_FALSE(recheck_path(field, broken));
    }
  }
}

TEST_CASE("cross openness frequency matches the Poisson estimate") {
  const double rho = 0.25, h = 0.5;
  long open = 0, total = 0, paths = 0;
  const int seeds = 60;
  for (int s = 0; s < seeds; ++s) {
    ObstacleField field({rho, 0.05, 0.1, 1.0, static_cast<std::uint64_t>(s + 100)}, 8.0);
    field.ensure_band(-1.0, 6.0);
    for (int row = 1; row < 10; ++row)
      for (int col = 1; col < 15; col += 3) {
        open += cross_is_empty(field, h, {col, row});
        ++total;
      }
    paths += find_free_path(field, h, 4.0, 0.0).has_value();
  }
  const double p = std::exp(-5.0 * rho * h * h);
  const double freq = static_cast<double>(open) / total;
  CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / total));
  CHECK(static_cast<double>(paths) / seeds >= p);
}

TEST_CASE("propagating construction") {
  const double h = 1.0, v0 = 0.1;
  CHECK(bulge_curvature(h / (2 * v0), v0, h) == doctest::Approx(2.0 / h).epsilon(1e-15));
  CHECK(bulge_curvature(1e-12, v0, h) < 1e-11);
  auto rep = construct_path_evolution(h, 0.0 + 2.0 / h + 0.1, v0, 1.0, 0.0);
  CHECK(rep.ok);
  CHECK(rep.min_margin >= 0.0);
  CHECK(rep.kappa_at_contact == doctest::Approx(2.0 / h));
  CHECK_THROWS_AS(construct_path_evolution(h, 2.0 / h + 0.05, v0, 1.0, 0.0), ValidationError);
  auto with_tau = construct_path_evolution(0.5, 0.3 + 4.0 + 0.2, 0.2, 1.0, 0.3);
  CHECK(with_tau.ok);

  // The bulge normal velocity y / t agrees with finite differences of the family.
  auto bulge = [&](double x, double t) {
    const double k = bulge_curvature(t, v0, h), R = 1 / k, a = h / 2;
    return std::sqrt(R * R - x * x) - std::sqrt(R * R - a * a);
  };
  for (double t : {0.5, 2.0, 4.5}) {
    for (double x : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
      const double dt = 1e-6, dx = 1e-6;
      const double ut = (bulge(x, t + dt) - bulge(x, t - dt)) / (2 * dt);
      const double ux = (bulge(x + dx, t) - bulge(x - dx, t)) / (2 * dx);
      const double vn_fd = ut / std::sqrt(1 + ux * ux);
      CHECK(vn_fd <= bulge(x, t) / t + 1e-6);
    }
  }
}

TEST_CASE("analytic bounds") {
  ObstacleParams p{0.01, 0.5, 0.6, 1.0, 0};
  const double expect = std::sqrt(2.0) * std::pow(0.25, 1.5) * 0.1 / (4.0 * std::sqrt(std::log(16.0)));
  CHECK(analytic_bounds(p, 0.0).f_lb == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(0.0026541).epsilon(1e-4));

  ObstacleParams q{1.0, 0.1, 0.2, 2.0, 0}, q4 = q;
  q4.rho = 4.0;
  const auto b1 = analytic_bounds(q, 0.3), b4 = analytic_bounds(q4, 0.3);
  CHECK((b4.f_lb - 0.3) == doctest::Approx(2.0 * (b1.f_lb - 0.3)).epsilon(1e-14));
  CHECK((b4.f_ub - 0.3) == doctest::Approx(2.0 * (b1.f_ub - 0.3)).epsilon(1e-14));

  // Past f = 2 / r0, r = 2 / f and c grows like f^0 : (f/2 * 2/f)^{3/2} = 1.
  const double c_hi = lower_bound_constant(0.1, 40.0), c_hi2 = lower_bound_constant(0.1, 400.0);
  CHECK(c_hi == doctest::Approx(c_hi2).epsilon(1e-14));
  CHECK(lower_bound_constant(0.1, 20.0) == doctest::Approx(c_hi).epsilon(1e-14));
  CHECK(lower_bound_constant(0.1, 10.0) < c_hi);
  // Saturation at f / 2 for dense fields.
  ObstacleParams dense{1e8, 0.1, 0.2, 2.0, 0};
  CHECK(analytic_bounds(dense, 0.0).f_lb == 1.0);
}

TEST_CASE("a dense strong wall admits a barrier") {
  ObstacleParams p{1.0, 0.1, 0.2, 5.0, 0};
  std::vector<Point> wall;
  for (int k = 0; k < 80; ++k) wall.push_back({0.05 * k, 1.0});
  auto field = ObstacleField::with_centers(p, 4.0, wall);
  auto cert = best_lower_certificate(field, 0.0);
  REQUIRE(cert);
  CHECK(cert->f_certified > 0.0);
  CHECK(cert->barrier.min_height() > 0.0);
}
