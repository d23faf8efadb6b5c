#include "depin/depinning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "depin/errors.hpp"
#include "depin/rng.hpp"

namespace depin {

void BisectionConfig::validate() const {
  if (!(tol_f > 0.0)) throw ValidationError("tol_f must be > 0");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (doubling_cap < 0) throw ValidationError("doubling_cap must be >= 0");
  if (f_lo && f_hi && !(*f_lo < *f_hi)) throw ValidationError("F_lo must be < F_hi");
}

CriticalEstimate estimate_critical(ObstacleField& field, const KineticRelation& kinetics,
                                   const SimConfig& sim, const BisectionConfig& bis) {
  kinetics.validate();
  sim.validate();
  bis.validate();
  const double tau = kinetics.tau;
  const double escape = resolved_escape_height(sim, field.params());
  double lo = bis.f_lo.value_or(tau);
  double hi = bis.f_hi.value_or(tau + field.params().f + 2.0 / escape);
  if (!(hi > lo)) throw ValidationError("bisection needs F_hi > F_lo");

  CriticalEstimate est;
  est.seed = field.params().seed;
  auto ballistic = [&](double F) {
    const Outcome out = run(field, kinetics, F, sim);
    est.log.push_back({F, out.tag, out.reason, out.t_decided});
    if (out.tag == OutcomeTag::Undecided) ++est.undecided;
    return out.tag == OutcomeTag::Ballistic;
  };

  if (ballistic(lo)) {
    std::ostringstream msg;
    msg << "lower bracket F=" << lo << " is already ballistic";
    throw BracketError(msg.str());
  }
  // Doubling measures the excess from tau, or from F_lo when that is lower.
  const double base = std::min(tau, lo);
  bool found = false;
  for (int k = 0; k <= bis.doubling_cap; ++k) {
    if (ballistic(hi)) {
      found = true;
      break;
    }
    lo = hi;
    hi = base + 2.0 * (hi - base);
  }
  if (!found) {
    const bool all_undecided = std::all_of(est.log.begin(), est.log.end(), [](const Probe& p) {
      return p.tag == OutcomeTag::Undecided;
    });
    std::ostringstream msg;
    msg << (all_undecided ? "all probes undecided" : "no ballistic run")
        << " up to F=" << est.log.back().F << " after " << bis.doubling_cap << " doublings";
    throw BracketError(msg.str());
  }
  for (int it = 0; it < bis.max_iter && hi - lo > bis.tol_f; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ballistic(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  est.f_pin = lo;
  est.f_ball = hi;
  est.f_crit = 0.5 * (lo + hi);
  est.converged = hi - lo <= bis.tol_f;
  return est;
}

PowerLawFit fit_power_law(const std::vector<double>& rho, const std::vector<double>& gap) {
  if (rho.size() != gap.size() || rho.size() < 2) {
    throw ValidationError("power-law fit needs at least two (rho, gap) pairs");
  }
  const std::size_t n = rho.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rho[i] > 0.0) || !(gap[i] > 0.0)) throw ValidationError("power-law fit needs positive data");
    x[i] = std::log(rho[i] / rho[0]);
    y[i] = std::log(gap[i] / gap[0]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("power-law fit needs at least two distinct densities");
  PowerLawFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = (my + std::log(gap[0])) - fit.slope * (mx + std::log(rho[0]));
  return fit;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

CriticalEstimate simulate_cell(const CellKey& key, const SweepConfig& cfg) {
  ObstacleParams params = cfg.base;
  params.rho = key.rho;
  params.seed = key.seed;
  params.validate();
  ObstacleField field(params, cfg.width_spacings / std::sqrt(key.rho));
  return estimate_critical(field, cfg.kinetics, cfg.sim, cfg.bisection);
}

namespace {

struct UsedDensity {
  double rho;
  std::vector<double> gaps;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ScalingStudy scaling_sweep(const SweepConfig& cfg, const CellEstimator& estimator) {
  if (cfg.densities.empty()) throw ValidationError("scaling sweep needs at least one density");
  if (cfg.n_seeds == 0) throw ValidationError("n_seeds must be >= 1");
  for (double rho : cfg.densities) {
    if (!(rho > 0.0)) throw ValidationError("densities must be > 0");
  }
  const std::size_t nd = cfg.densities.size();
  const std::size_t cells = nd * cfg.n_seeds;
  std::vector<std::optional<CriticalEstimate>> results(cells);
  std::vector<std::string> failures(cells);
  parallel_for(cells, cfg.workers, [&](std::size_t idx) {
    CellKey key;
    key.rho_index = idx / cfg.n_seeds;
    key.seed_index = idx % cfg.n_seeds;
    key.rho = cfg.densities[key.rho_index];
    key.seed = derive_seed(cfg.master_seed, {static_cast<std::int64_t>(key.rho_index),
                                             static_cast<std::int64_t>(key.seed_index)});
    try {
      results[idx] = estimator(key, cfg);
    } catch (const std::exception& e) {
      failures[idx] = e.what();
    }
  });

  return aggregate_study(cfg, results, failures);
}

ScalingStudy aggregate_study(const SweepConfig& cfg,
                             const std::vector<std::optional<CriticalEstimate>>& results,
                             const std::vector<std::string>& failures) {
  const std::size_t nd = cfg.densities.size();
  if (results.size() != nd * cfg.n_seeds || failures.size() != results.size()) {
    throw ValidationError("study results do not match the density and seed grid");
  }
  ScalingStudy study;
  study.tau = cfg.kinetics.tau;
  std::vector<UsedDensity> used;
  for (std::size_t d = 0; d < nd; ++d) {
    DensityResult dr;
    dr.rho = cfg.densities[d];
    dr.rho_index = d;
    std::vector<double> gaps;
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      const std::size_t idx = d * cfg.n_seeds + s;
      dr.estimates.push_back(results[idx]);
      dr.failures.push_back(failures[idx]);
      if (results[idx]) gaps.push_back(results[idx]->f_crit - study.tau);
    }
    dr.succeeded = gaps.size();
    if (!gaps.empty()) {
      dr.mean_gap = mean_of(gaps);
      double ss = 0.0;
      for (double g : gaps) ss += (g - dr.mean_gap) * (g - dr.mean_gap);
      dr.stderr_gap = gaps.size() > 1
                          ? std::sqrt(ss / static_cast<double>(gaps.size() - 1)) /
                                std::sqrt(static_cast<double>(gaps.size()))
                          : 0.0;
    }
    if (2 * dr.succeeded < cfg.n_seeds) {
      dr.excluded = true;
      dr.note = "more than half of the estimates failed";
    } else if (!(dr.mean_gap > 0.0)) {
      dr.excluded = true;
      dr.note = "non-positive mean gap";
    } else if (dr.succeeded < cfg.min_seeds) {
      dr.excluded = true;
      dr.note = "fewer successful seeds than needed for the fit";
    } else {
      used.push_back({dr.rho, gaps});
    }
    study.densities.push_back(std::move(dr));
  }

  if (used.size() < std::max<std::size_t>(cfg.min_densities, 2)) {
    study.note = "not enough usable densities for a fit";
    return study;
  }
  std::vector<double> rho, mean_gap;
  for (const auto& u : used) {
    rho.push_back(u.rho);
    mean_gap.push_back(mean_of(u.gaps));
  }
  study.fit = fit_power_law(rho, mean_gap);

  study.bootstrap = cfg.bootstrap;
  study.ci_lo = study.ci_hi = study.fit->slope;
  if (cfg.bootstrap > 0) {
    CounterRng rng(derive_seed(cfg.master_seed, {-1}));
    std::vector<double> slopes;
    slopes.reserve(cfg.bootstrap);
    std::vector<double> resampled(used.size());
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
      for (std::size_t d = 0; d < used.size(); ++d) {
        const auto& g = used[d].gaps;
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(g.size()));
          s += g[std::min(pick, g.size() - 1)];
        }
        resampled[d] = s / static_cast<double>(g.size());
      }
      bool positive = std::all_of(resampled.begin(), resampled.end(), [](double v) { return v > 0.0; });
      if (positive) slopes.push_back(fit_power_law(rho, resampled).slope);
    }
    if (!slopes.empty()) {
      std::sort(slopes.begin(), slopes.end());
      auto at = [&](double q) {
        const double pos = q * static_cast<double>(slopes.size() - 1);
        return slopes[static_cast<std::size_t>(std::llround(pos))];
      };
      study.ci_lo = at(0.025);
      study.ci_hi = at(0.975);
    }
  }
  return study;
}

SandwichReport certificate_sandwich(ObstacleField& field, const KineticRelation& kinetics,
                                    const SimConfig& sim, const BisectionConfig& bis,
                                    const SandwichConfig& cfg) {
  SandwichReport rep;
  std::ostringstream notes;
  const double tau = kinetics.tau;
  if (auto lower = best_lower_certificate(field, tau, cfg.barrier)) {
    rep.f_lb = lower->f_certified;
  } else {
    notes << "no lower certificate; ";
  }
  try {
    const auto est = estimate_critical(field, kinetics, sim, bis);
    rep.f_hat = est.f_crit;
    rep.undecided = est.undecided;
  } catch (const SimulationError& e) {
    notes << "estimate failed: " << e.what() << "; ";
  }
  const double dx = sim.dx > 0.0 ? sim.dx : default_dx(field.params());
  const double h_min = cfg.path_h_min > 0.0 ? cfg.path_h_min : dx;
  const double height =
      cfg.path_height > 0.0 ? cfg.path_height : resolved_escape_height(sim, field.params());
  if (auto path = best_free_path(field, h_min, height, tau)) {
    rep.f_ub = path->f_ub;
    rep.path_h = path->h;
  } else {
    notes << "no free path with h >= " << h_min << "; ";
  }

  constexpr double kSlack = 1e-9;
  rep.one_sided = !(rep.f_lb && rep.f_hat && rep.f_ub);
  bool holds = rep.f_hat.has_value();
  if (rep.f_hat && rep.f_lb) holds = holds && *rep.f_lb <= *rep.f_hat + kSlack;
  if (rep.f_hat && rep.f_ub) holds = holds && *rep.f_hat <= *rep.f_ub + kSlack;
  if (rep.f_lb && rep.f_ub) holds = holds && *rep.f_lb <= *rep.f_ub + kSlack;
  rep.holds = holds;
  if (rep.f_hat && rep.f_lb && *rep.f_lb > *rep.f_hat + kSlack) {
    notes << "F_lb above estimate by " << *rep.f_lb - *rep.f_hat << "; ";
  }
  if (rep.f_hat && rep.f_ub && *rep.f_hat > *rep.f_ub + kSlack) {
    notes << "estimate above F_ub by " << *rep.f_hat - *rep.f_ub << " (finite window, path h="
          << rep.path_h.value_or(0.0) << "); ";
  }
  rep.note = notes.str();
  if (!rep.note.empty()) rep.note.resize(rep.note.size() - 2);
  return rep;
}

}  // namespace depin
