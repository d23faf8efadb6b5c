// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments pick
// criteria by number, e.g. `acceptance 2 5`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depin/certificates.hpp"
#include "depin/depinning.hpp"
#include "depin/front.hpp"
#include "depin/harness.hpp"
#include "oracles.hpp"

using namespace depin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DEPIN_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Settings shared by the scaling sweep and the certificate checks.
ObstacleParams base_params(double rho, std::uint64_t seed) { return {rho, 0.1, 0.2, 2.0, seed}; }
constexpr double kSweepDx = 0.05;
constexpr std::uint64_t kMasterSeed = 20240601;

json sweep_config() {
  return json{{"tau", 0.0},         {"f", 2.0},
              {"r0", 0.1},          {"r1", 0.2},
              {"densities", {0.5, 1.0, 2.0, 4.0, 8.0}},
              {"width_spacings", 24.0},
              {"n_seeds", 12},      {"tol_f", 5e-3},
              {"dx", kSweepDx},     {"seed", kMasterSeed}};
}

const fs::path kRunW1 = "scaling_workers1";
const fs::path kRunW3 = "scaling_workers3";

void run_full_sweep(const fs::path& out, int workers) {
  static std::set<std::string> done;
  if (done.count(out.string())) return;
  fs::remove_all(out);
  fs::create_directories(out);
  std::ofstream(out / "config.json") << sweep_config().dump(2);
  const int rc = cli("scaling --config " + (out / "config.json").string() + " --workers " +
                     std::to_string(workers) + " --out " + out.string());
  if (rc != 0) throw std::runtime_error("scaling run exited with " + std::to_string(rc));
  done.insert(out.string());
}

Verdict criterion_scaling_exponent() {
  run_full_sweep(kRunW1, 1);
  const json summary = json::parse(slurp(kRunW1 / "scaling_summary.json"));
  const json& study = summary["study"];
  if (study["fit"].is_null()) return {false, "no fit: " + study["note"].get<std::string>()};
  const double slope = study["fit"]["slope"];
  std::ostringstream d;
  d << "slope " << fmt(slope, 4) << " CI95 [" << fmt(study["ci95"][0].get<double>(), 4) << ", "
    << fmt(study["ci95"][1].get<double>(), 4) << "], mean gaps";
  for (const auto& row : study["densities"]) {
    d << ' ' << fmt(row["rho"].get<double>(), 3) << ':' << fmt(row["mean_gap"].get<double>(), 4);
    if (row["excluded"].get<bool>()) d << "(excluded)";
  }
  return {slope >= 0.35 && slope <= 0.65, d.str()};
}

Verdict criterion_obstacle_free_threshold() {
  ObstacleParams p = base_params(1.0, 0);
  auto field = ObstacleField::with_centers(p, 24.0, {});
  SimConfig sim;
  sim.h_ballistic = 0.1;
  sim.t_max = 400.0;
  BisectionConfig bis;
  const KineticRelation kin{1.0, 0.4};
  const auto est = estimate_critical(field, kin, sim, bis);
  const double dx = default_dx(p);
  const double dt = resolved_dt(sim, kin, field.domain().width / node_count(24.0, dx));
  const double tol = std::max(bis.tol_f, 2.0 * dt);
  const double err = std::abs(est.f_crit - 0.4);
  return {err <= tol, "F_crit " + fmt(est.f_crit, 8) + ", |error| " + fmt(err, 3) + " <= " + fmt(tol, 3)};
}

Verdict criterion_comparison() {
  int preserved = 0, total = 0;
  for (int fi = 0; fi < 10; ++fi) {
    ObstacleParams p = base_params(2.0, derive_seed(77, {fi}));
    ObstacleField field(p, 24.0 / std::sqrt(2.0));
    const std::size_t n = node_count(field.domain().width, kSweepDx);
    const double dx = field.domain().width / static_cast<double>(n);
    const double dt = 0.2 * dx * dx;
    for (int pi = 0; pi < 10; ++pi) {
      CounterRng rng(derive_seed(78, {fi, pi}));
      auto u0 = FrontState::flat(n, dx);
      auto v0 = u0;
      const double W = field.domain().width;
      const double shift = pi % 4 == 0 ? 0.0 : rng.uniform(0.0, 0.4);
      double ph[3], amp[3], bump[2];
      for (int k = 0; k < 3; ++k) {
        ph[k] = rng.uniform(0.0, 2.0 * M_PI);
        amp[k] = rng.uniform(0.0, 0.25 / (k + 1));
      }
      bump[0] = rng.uniform(0.0, 0.3);
      bump[1] = rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = u0.x(i);
        double u = 0.0;
        for (int k = 0; k < 3; ++k) u += amp[k] * std::sin(2.0 * M_PI * (k + 1) * x / W + ph[k]);
        u0.heights[i] = u;
        v0.heights[i] = u + shift + bump[0] * std::max(0.0, std::sin(2.0 * M_PI * 2.0 * x / W + bump[1]));
      }
      const KineticRelation kin{1.0, pi % 2 == 0 ? 0.0 : rng.uniform(0.0, 0.3)};
      const double F = rng.uniform(0.1, 1.2);
      preserved += verify_monotone(field, kin, F, u0, v0, 10000, dt);
      ++total;
    }
  }
  return {preserved == total, std::to_string(preserved) + "/" + std::to_string(total) + " pairs ordered"};
}

Verdict criterion_prox_laws() {
  CounterRng rng(404);
  long violations = 0;
  const long trials = 100000;
  for (long k = 0; k < trials; ++k) {
    const double b = rng.uniform(-4.0, 4.0);
    const double lambda = k % 10 == 0 ? std::abs(b) : rng.uniform(0.0, 3.0);
    const double eps = rng.uniform(0.01, 5.0);
    const double v = prox_dry_friction(b, lambda, eps);
    if ((v == 0.0) != (std::abs(b) <= lambda)) ++violations;
    if (!(std::abs(eps * v) <= std::abs(b))) ++violations;
    const double b2 = b + rng.uniform(0.0, 1.0);
    if (!(prox_dry_friction(b2, lambda, eps) >= v)) ++violations;
  }
  return {violations == 0, std::to_string(trials) + " triples, " + std::to_string(violations) + " violations"};
}

Verdict criterion_field_profile() {
  ObstacleParams p = base_params(1.0, 0);
  const Point c{3.0, 5.0};
  auto field = ObstacleField::with_centers(p, 8.0, {c});
  bool exact = true;
  for (int k = 0; k <= 64; ++k) {
    const double d = p.r0 * k / 64.0;
    const double a = 2.0 * M_PI * k / 64.0;
    exact = exact && field.phi(c.x + d * std::cos(a), c.y + d * std::sin(a)) == p.f;
    const double d_out = p.r1 + 0.5 * k / 64.0;
    exact = exact && field.phi(c.x + d_out * std::cos(a), c.y + d_out * std::sin(a)) == 0.0;
  }
  double worst = 0.0;
  for (int k = 1; k <= 32; ++k) {
    const double d = p.r0 + (p.r1 - p.r0) * k / 33.0;
    const double a = 0.3 * k;
    const double ref = p.f * testing::mollified_disc_cartesian(d, p.disc_radius(), p.mollifier_radius());
    worst = std::max(worst, std::abs(field.phi(c.x + d * std::cos(a), c.y + d * std::sin(a)) - ref));
  }
  return {exact && worst <= 1e-6,
          std::string(exact ? "plateaus exact" : "plateau mismatch") + ", max deviation " + fmt(worst, 3)};
}

// Signed curvature of the circle through three graph points (positive when convex).
double menger(double x1, double y1, double x2, double y2, double x3, double y3) {
  const double cross = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1);
  const double a = std::hypot(x2 - x1, y2 - y1), b = std::hypot(x3 - x2, y3 - y2),
               c = std::hypot(x3 - x1, y3 - y1);
  return 2.0 * cross / (a * b * c);
}

Verdict criterion_geometry() {
  CounterRng rng(606);
  double interp = 0.0, slope_err = 0.0, curv = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const Point p1{rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0)};
    const Point p2{p1.x + rng.uniform(0.05, 3.0), p1.y + rng.uniform(-0.5, 0.5)};
    const double xbar = p2.x - p1.x, ybar = p2.y - p1.y;
    const double kappa = rng.uniform(0.0, 1.0) * 2.0 * xbar / (xbar * xbar + ybar * ybar);
    if (auto arc = arc_connect(p1, p2, kappa, 50.0)) {
      interp = std::max({interp, std::abs(arc->value(p1.x) - p1.y), std::abs(arc->value(p2.x) - p2.y)});
    }
    const double r = rng.uniform(0.01, 1.0), f_in = rng.uniform(0.0, 0.95) / r;
    if (auto cap = obstacle_cap({p1.x, p1.y}, r, f_in)) {
      const double expect = f_in == 0.0 ? 0.0 : r / std::sqrt(1.0 / (f_in * f_in) - r * r);
      slope_err = std::max({slope_err, std::abs(cap->slope(p1.x + r) - expect),
                            std::abs(cap->slope(p1.x - r) + expect)});
    }
  }
  // Curvature of the arcs of assembled barriers, from sampled point triples.
  int barriers = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    ObstacleField field(base_params(2.0, derive_seed(kMasterSeed, {0, static_cast<std::int64_t>(s)})),
                        24.0 / std::sqrt(2.0));
    auto cert = best_lower_certificate(field, 0.0);
    if (!cert) continue;
    ++barriers;
    const auto& g = cert->barrier.geometry;
    for (const auto& seg : cert->barrier.segments) {
      const double want = seg.kind == SegmentKind::Cap ? g.f_in : -g.f_out;
      const double len = seg.b - seg.a;
      for (int j = 0; j < 16; ++j) {
        const double x1 = seg.a + len * j / 18.0, x2 = x1 + len / 18.0, x3 = x2 + len / 18.0;
        const double m = menger(x1, seg.value(x1), x2, seg.value(x2), x3, seg.value(x3));
        curv = std::max(curv, std::abs(m - want));
      }
    }
  }
  std::ostringstream d;
  d << "interpolation " << fmt(interp, 3) << ", curvature " << fmt(curv, 3) << " over " << barriers
    << " barriers, cap slope " << fmt(slope_err, 3);
  return {interp <= 1e-12 && curv <= 1e-6 && slope_err <= 1e-12 && barriers > 0, d.str()};
}

Verdict criterion_selection_oracle() {
  ObstacleParams p = base_params(1.0, 0);
  SelectionGrid grid;
  grid.columns = 8;
  grid.rows = 6;
  grid.period = 1.0;
  grid.l = 0.8;
  grid.h = 0.5;
  grid.y0 = p.r1;
  grid.r1 = p.r1;
  CounterRng rng(707);
  int agree = 0;
  const int cases = 200;
  for (int c = 0; c < cases; ++c) {
    std::vector<std::vector<bool>> occ(8, std::vector<bool>(6));
    std::vector<Point> centers;
    const double fill = rng.uniform(0.25, 0.9);
    for (int k = 0; k < 8; ++k) {
      for (int j = 0; j < 6; ++j) {
        occ[k][j] = rng.uniform() < fill;
        if (!occ[k][j]) continue;
        const Rect b = grid.box(k, j);
        centers.push_back({rng.uniform(b.x0, b.x1), rng.uniform(b.y0, std::nextafter(b.y1, b.y0))});
      }
    }
    // Decoys in the gaps between boxes must not count.
    for (int k = 0; k < 8; ++k) centers.push_back({k + 0.9, rng.uniform(0.2, 3.2)});
    auto field = ObstacleField::with_centers(p, 8.0, centers);
    agree += find_lipschitz_selection(field, grid) == testing::exhaustive_minimal_selection(occ, true);
  }
  return {agree == cases, std::to_string(agree) + "/" + std::to_string(cases) + " patterns agree"};
}

Verdict criterion_certificate_soundness() {
  const double rho = 2.0, W = 24.0 / std::sqrt(rho);
  int certs = 0, sound = 0, below = 0;
  double worst_residual = INFINITY, worst_excess = -INFINITY;
  std::ostringstream issues;
  for (int s = 0; s < 20; ++s) {
    ObstacleField field(base_params(rho, derive_seed(kMasterSeed, {0, s})), W);
    auto cert = best_lower_certificate(field, 0.0);
    if (!cert) {
      issues << " seed " << s << ": no certificate;";
      continue;
    }
    ++certs;
    // Denser independent pass over every segment.
    BarrierConfig dense;
    dense.samples_per_segment = 2049;
    auto rep = verify_supersolution(cert->barrier, field, cert->margin, dense);
    double res = rep.min_residual;
    for (const auto& seg : cert->barrier.segments) {
      for (int j = 0; j <= 4000; ++j) {
        const double x = seg.a + (seg.b - seg.a) * j / 4000.0;
        res = std::min(res, -seg.curvature() + field.phi(x, seg.value(x)) - cert->margin);
      }
    }
    bool corners = true;
    for (const auto& jn : cert->barrier.junctions)
      corners = corners && jn.left_slope >= jn.right_slope - 1e-10 && jn.gap <= 1e-10;
    worst_residual = std::min(worst_residual, res);
    if (res >= -1e-10 && corners) ++sound;

    SimConfig sim;
    sim.dx = kSweepDx;
    sim.t_max = 400.0;
    sim.snapshot_stride = 1;
    double excess = -INFINITY;
    const auto& barrier = cert->barrier;
    const auto out = run(field, {}, cert->f_certified, sim, nullptr,
                         [&](const FrontState& st, std::uint64_t) {
                           for (std::size_t i = 0; i < st.size(); ++i)
                             excess = std::max(excess, st.heights[i] - barrier.value(st.x(i)));
                         });
    worst_excess = std::max(worst_excess, excess);
    const bool stopped = out.tag == OutcomeTag::Pinned || out.reason == StopReason::Arrested;
    if (excess <= out.final_state.dx && stopped) {
      ++below;
    } else {
      issues << " seed " << s << ": excess " << fmt(excess, 3) << ", " << to_string(out.reason) << ';';
    }
  }
  std::ostringstream d;
  d << certs << " certificates, " << sound << " re-verified (min residual " << fmt(worst_residual, 3)
    << "), " << below << " runs below the barrier until arrest (max excess " << fmt(worst_excess, 3)
    << ")" << issues.str();
  return {certs > 0 && sound == certs && below == certs, d.str()};
}

Verdict criterion_sandwich() {
  const fs::path out = "sandwich_rho2";
  fs::remove_all(out);
  auto cfg = parse_config(json{{"rho", 2.0},
                               {"tau", 0.0},
                               {"f", 2.0},
                               {"r0", 0.1},
                               {"r1", 0.2},
                               {"width_spacings", 24.0},
                               {"dx", kSweepDx},
                               {"n_seeds", 20},
                               {"seed", kMasterSeed},
                               {"out", out.string()}});
  std::ostringstream log;
  run_experiment("sandwich", cfg, log);
  const json summary = json::parse(slurp(out / "sandwich_summary.json"));
  const std::size_t passes = summary["passes"], attempts = summary["attempts"];
  std::ostringstream d;
  d << passes << "/" << attempts << " seeds with F_lb <= F_hat <= F_ub";
  for (const auto& c : summary["cells"]) {
    if (c["holds"].get<bool>() && !c["one_sided"].get<bool>()) continue;
    d << "; seed " << c["seed_index"] << ": " << c["note"].get<std::string>();
  }
  const auto& cell0 = summary["cells"][0];
  d << " (e.g. " << cell0["F_lb"].dump() << " <= " << cell0["F_hat"].dump() << " <= "
    << cell0["F_ub"].dump() << ")";
  return {10 * passes >= 9 * attempts, d.str()};
}

Verdict criterion_path_evolution() {
  const double h = 1.0, v0 = 0.1;
  const auto rep = construct_path_evolution(h, 2.1, v0, 1.0, 0.0);
  const double kappa = bulge_curvature(h / (2.0 * v0), v0, h);
  const bool ok = rep.ok && rep.min_margin >= 0.0 && std::abs(kappa - 2.0 / h) <= 1e-12;
  return {ok, std::to_string(rep.samples.size()) + " samples, min margin " + fmt(rep.min_margin, 3) +
                  ", kappa at contact " + fmt(kappa, 17)};
}

Verdict criterion_determinism() {
  run_full_sweep(kRunW1, 1);
  run_full_sweep(kRunW3, 3);
  std::vector<std::string> differ;
  for (const char* name : {"scaling.csv", "scaling_summary.json"}) {
    if (slurp(kRunW1 / name) != slurp(kRunW3 / name)) differ.emplace_back(name);
  }
  if (!differ.empty()) return {false, "differs: " + differ.front()};
  return {true, "scaling.csv and scaling_summary.json byte-identical for 1 and 3 workers"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"scaling exponent in [0.35, 0.65]", criterion_scaling_exponent},
      {"obstacle-free threshold", criterion_obstacle_free_threshold},
      {"discrete comparison", criterion_comparison},
      {"prox operator laws", criterion_prox_laws},
      {"field profile", criterion_field_profile},
      {"geometry closed forms", criterion_geometry},
      {"Lipschitz selection oracle", criterion_selection_oracle},
      {"certificate soundness", criterion_certificate_soundness},
      {"certificate sandwich", criterion_sandwich},
      {"path evolution verifier", criterion_path_evolution},
      {"determinism across worker counts", criterion_determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " -- "
              << v.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
    failed += !v.pass;
  }
  std::cout << (failed == 0 ? "all selected criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
