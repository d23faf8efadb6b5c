#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "depin/obstacle_field.hpp"

namespace depin {

/// Kinetic relation F(a) = epsilon * a + tau * dR(a): viscous drag plus a
/// stick-slip threshold. sup F(0) == tau.
struct KineticRelation {
  double epsilon = 1.0;
  double tau = 0.0;

  void validate() const;
};

/// Unique solution v of epsilon*v + lambda*dR(v) ∋ b, i.e. soft thresholding
/// sign(b) * max(|b| - lambda, 0) / epsilon. Rounded toward zero so that
/// |epsilon * v| <= |b| also holds in floating point.
double prox_dry_friction(double b, double lambda, double epsilon);

/// Heights of a graph over a periodic grid: node i sits at x_offset + i*dx.
struct FrontState {
  std::vector<double> heights;
  double dx = 1.0;
  double time = 0.0;
  double x_offset = 0.0;

  static FrontState flat(std::size_t n, double dx, double height = 0.0);

  std::size_t size() const { return heights.size(); }
  double width() const { return dx * static_cast<double>(heights.size()); }
  double x(std::size_t i) const { return x_offset + dx * static_cast<double>(i); }
  double min_height() const;
  double max_height() const;
  double mean_height() const;
};

/// Discrete curvature d/dx(u_x / sqrt(1 + u_x^2)) at node i from the two
/// half-node slopes, with periodic neighbours.
double graph_curvature(const FrontState& state, std::size_t i);

struct SimConfig {
  double dx = 0.0;             // <= 0: min(r0/4, 0.05/sqrt(rho))
  double dt = 0.0;             // <= 0: cfl_factor * epsilon * dx^2
  double cfl_factor = 0.2;
  double t_max = 200.0;
  double h_ballistic = 0.0;    // <= 0: kDefaultEscapeSpacings / sqrt(rho)
  int pinned_confirm_steps = 10;
  double tol_v = 1e-7;         // max |v| below which a run counts as arrested
  double slope_max = 10.0;
  std::size_t snapshot_stride = 0;

  static constexpr double kDefaultEscapeSpacings = 4.0;
  static constexpr double kMaxCfl = 0.25;

  void validate() const;
};

/// Grid spacing actually used for a window: the requested (or default) dx,
/// adjusted so that an integer number (>= 8) of nodes tiles the window.
double default_dx(const ObstacleParams& params);
std::size_t node_count(double width, double dx);
double resolved_dt(const SimConfig& cfg, const KineticRelation& kin, double dx);
double resolved_escape_height(const SimConfig& cfg, const ObstacleParams& params);

enum class OutcomeTag { Pinned, Ballistic, Undecided };
enum class StopReason { Stuck, Escaped, TimeLimit, Arrested, SlopeCap };

std::string_view to_string(OutcomeTag tag);
std::string_view to_string(StopReason reason);

struct Outcome {
  OutcomeTag tag = OutcomeTag::Undecided;
  StopReason reason = StopReason::TimeLimit;
  FrontState final_state;
  double mean_velocity = std::numeric_limits<double>::quiet_NaN();  // Ballistic only
  double t_decided = 0.0;
  std::uint64_t steps = 0;
  double dt = 0.0;
  double last_max_velocity = 0.0;
};

/// Explicit stepping of v + (tau + phi) dR(v) ∋ kappa + F on a graph. Caches,
/// per node column, the obstacle centers that can reach it, so evaluating phi
/// at a node costs a binary search. Extends the (generated) field band ahead
/// of the front as needed.
class FrontSolver {
 public:
  FrontSolver(ObstacleField& field, const KineticRelation& kinetics, double slope_max = 10.0);

  struct StepInfo {
    bool all_stuck = false;       // every nodal velocity exactly 0
    double max_abs_velocity = 0.0;
    double max_slope = 0.0;
    bool slope_exceeded = false;
    double min_height = 0.0;      // after the step
  };

  /// One forward step in place. Throws SimulationError on non-finite heights.
  StepInfo advance(FrontState& state, double F, double dt);

  /// phi at node i of the last geometry seen, height y (same value as field.phi).
  double node_phi(std::size_t i, double y);
  /// Prepares the column cache for the geometry of `state` and the band it needs.
  void prepare(const FrontState& state);

  std::span<const double> velocities() const { return velocity_; }
  std::span<const double> curvatures() const { return curvature_; }
  std::span<const double> thresholds() const { return lambda_; }

  const ObstacleField& field() const { return *field_; }
  const KineticRelation& kinetics() const { return kinetics_; }

 private:
  struct ColumnEntry {
    double y;
    double dx2;
  };

  void rebuild_columns(const FrontState& state);

  ObstacleField* field_;
  KineticRelation kinetics_;
  double slope_max_;

  std::size_t n_ = 0;
  double dx_ = 0.0;
  double x_offset_ = 0.0;
  std::uint64_t generation_ = ~std::uint64_t{0};
  std::vector<std::vector<ColumnEntry>> columns_;

  std::vector<double> flux_;
  std::vector<double> curvature_;
  std::vector<double> lambda_;
  std::vector<double> velocity_;
  std::vector<double> next_;
};

/// One step on a copy of `state`.
FrontState step(const FrontState& state, ObstacleField& field, const KineticRelation& kinetics,
                double F, double dt);

using SnapshotSink = std::function<void(const FrontState&, std::uint64_t step)>;

/// Runs from `initial` (flat u == 0 over the field width when null) until the
/// front is Pinned (all velocities exactly 0 for pinned_confirm_steps steps),
/// Ballistic (min height >= escape height) or Undecided (time limit, arrested
/// motion below tol_v, or slope cap).
Outcome run(ObstacleField& field, const KineticRelation& kinetics, double F, const SimConfig& cfg,
            const FrontState* initial = nullptr, const SnapshotSink& sink = {});

/// Steps u0 and v0 side by side and reports whether u <= v holds nodewise
/// after every step. Requires u0 <= v0 and matching geometry.
bool verify_monotone(ObstacleField& field, const KineticRelation& kinetics, double F,
                     const FrontState& u0, const FrontState& v0, std::size_t steps, double dt);

}  // namespace depin
