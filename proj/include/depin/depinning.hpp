#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "depin/certificates.hpp"
#include "depin/errors.hpp"
#include "depin/front.hpp"

namespace depin {

struct BisectionConfig {
  std::optional<double> f_lo;  // default tau
  std::optional<double> f_hi;  // default tau + f + 2 / h_escape
  double tol_f = 5e-3;
  int max_iter = 60;
  int doubling_cap = 8;

  void validate() const;
};

struct Probe {
  double F = 0.0;
  OutcomeTag tag = OutcomeTag::Undecided;
  StopReason reason = StopReason::TimeLimit;
  double t_decided = 0.0;
};

struct CriticalEstimate {
  double f_crit = 0.0;
  double f_pin = 0.0;   // largest probed force that was not ballistic
  double f_ball = 0.0;  // smallest probed force that was ballistic
  std::vector<Probe> log;
  int undecided = 0;
  std::uint64_t seed = 0;
  bool converged = false;
};

/// Thrown when no ballistic run is found below the doubling cap.
class BracketError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Bisection on run outcomes. Undecided counts as not ballistic. Every probe
/// starts from the same flat state on the same field.
CriticalEstimate estimate_critical(ObstacleField& field, const KineticRelation& kinetics,
                                   const SimConfig& sim, const BisectionConfig& bis);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;  // log(gap) at log(rho) == 0
  std::size_t points = 0;
};

/// Least squares of log(gap) against log(rho). Logs are taken of gap / gap[0]
/// and rho / rho[0], so scaling all gaps by a power of two leaves the slope
/// bit-identical.
PowerLawFit fit_power_law(const std::vector<double>& rho, const std::vector<double>& gap);

struct DensityResult {
  double rho = 0.0;
  std::size_t rho_index = 0;
  std::vector<std::optional<CriticalEstimate>> estimates;  // per seed; empty on failure
  std::vector<std::string> failures;                       // per seed, empty when fine
  double mean_gap = 0.0;
  double stderr_gap = 0.0;
  std::size_t succeeded = 0;
  bool excluded = false;
  std::string note;
};

struct ScalingStudy {
  double tau = 0.0;
  std::vector<DensityResult> densities;
  std::optional<PowerLawFit> fit;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t bootstrap = 0;
  std::string note;
};

struct CellKey {
  std::size_t rho_index = 0;
  std::size_t seed_index = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;  // derive_seed(master, {rho_index, seed_index})
};

struct SweepConfig {
  ObstacleParams base;  // rho and seed are overridden per cell
  std::vector<double> densities;
  std::size_t n_seeds = 12;
  std::uint64_t master_seed = 0;
  double width_spacings = 24.0;  // window width in units of 1 / sqrt(rho)
  KineticRelation kinetics;
  SimConfig sim;
  BisectionConfig bisection;
  std::size_t workers = 1;
  std::size_t bootstrap = 1000;
  std::size_t min_densities = 4;
  std::size_t min_seeds = 8;
};

using CellEstimator = std::function<CriticalEstimate(const CellKey&, const SweepConfig&)>;

/// Builds the field of a cell and runs estimate_critical on it.
CriticalEstimate simulate_cell(const CellKey& key, const SweepConfig& cfg);

/// Runs every (rho, seed) cell on a pool of workers, merges by key, fits the
/// exponent and bootstraps a 95% interval over seeds. The estimator is
/// pluggable so the fit can be checked on synthetic data.
ScalingStudy scaling_sweep(const SweepConfig& cfg, const CellEstimator& estimator = simulate_cell);

/// Per-density statistics, exclusions, fit and bootstrap from finished cells
/// (index rho_index * n_seeds + seed_index).
ScalingStudy aggregate_study(const SweepConfig& cfg,
                             const std::vector<std::optional<CriticalEstimate>>& results,
                             const std::vector<std::string>& failures);

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct SandwichReport {
  std::optional<double> f_lb;
  std::optional<double> f_hat;
  std::optional<double> f_ub;
  std::optional<double> path_h;
  bool holds = false;
  bool one_sided = false;
  int undecided = 0;
  std::string note;
};

struct SandwichConfig {
  BarrierConfig barrier;
  double path_h_min = 0.0;   // <= 0: dx of the simulation grid
  double path_height = 0.0;  // <= 0: escape height of the simulation
};

/// Lower certificate, bisection estimate and upper certificate on one field,
/// plus whether F_lb <= F_hat <= F_ub. Missing sides are reported, not thrown.
SandwichReport certificate_sandwich(ObstacleField& field, const KineticRelation& kinetics,
                                    const SimConfig& sim, const BisectionConfig& bis,
                                    const SandwichConfig& cfg = {});

}  // namespace depin
