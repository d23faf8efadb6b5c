#include "depin/front.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "depin/errors.hpp"

namespace depin {

void KineticRelation::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be > 0");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be >= 0");
}

double prox_dry_friction(double b, double lambda, double epsilon) {
  const double a = std::abs(b) - lambda;
  if (!(a > 0.0)) return 0.0;
  double v = a / epsilon;
  if (epsilon * v > a) v = std::nextafter(v, 0.0);
  return b < 0.0 ? -v : v;
}

FrontState FrontState::flat(std::size_t n, double dx, double height) {
  FrontState s;
  s.heights.assign(n, height);
  s.dx = dx;
  return s;
}

double FrontState::min_height() const { return *std::min_element(heights.begin(), heights.end()); }
double FrontState::max_height() const { return *std::max_element(heights.begin(), heights.end()); }
double FrontState::mean_height() const {
  double sum = 0.0;
  for (double h : heights) sum += h;
  return sum / static_cast<double>(heights.size());
}

namespace {

inline double flux_of(double s) { return s / std::sqrt(1.0 + s * s); }

}  // namespace

double graph_curvature(const FrontState& state, std::size_t i) {
  const auto& u = state.heights;
  const std::size_t n = u.size();
  const std::size_t ip = (i + 1) % n;
  const std::size_t im = (i + n - 1) % n;
  const double inv_dx = 1.0 / state.dx;
  const double sp = (u[ip] - u[i]) * inv_dx;
  const double sm = (u[i] - u[im]) * inv_dx;
  return (flux_of(sp) - flux_of(sm)) * inv_dx;
}

void SimConfig::validate() const {
  if (!(cfl_factor > 0.0) || cfl_factor > kMaxCfl) {
    throw ValidationError("cfl_factor must be in (0, 0.25]");
  }
  if (!(t_max > 0.0)) throw ValidationError("t_max must be > 0");
  if (pinned_confirm_steps < 1) throw ValidationError("pinned_confirm_steps must be >= 1");
  if (!(tol_v >= 0.0)) throw ValidationError("tol_v must be >= 0");
  if (!(slope_max > 0.0)) throw ValidationError("slope_max must be > 0");
}

double default_dx(const ObstacleParams& params) {
  return std::min(params.r0 / 4.0, 0.05 / std::sqrt(params.rho));
}

std::size_t node_count(double width, double dx) {
  const auto n = static_cast<std::size_t>(std::llround(width / dx));
  return std::max<std::size_t>(8, n);
}

double resolved_dt(const SimConfig& cfg, const KineticRelation& kin, double dx) {
  const double limit = SimConfig::kMaxCfl * kin.epsilon * dx * dx;
  const double dt = cfg.dt > 0.0 ? cfg.dt : cfg.cfl_factor * kin.epsilon * dx * dx;
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "dt=" << dt << " violates the explicit stability bound 0.25*epsilon*dx^2=" << limit;
    throw ValidationError(msg.str());
  }
  return dt;
}

double resolved_escape_height(const SimConfig& cfg, const ObstacleParams& params) {
  return cfg.h_ballistic > 0.0 ? cfg.h_ballistic
                               : SimConfig::kDefaultEscapeSpacings * params.spacing();
}

std::string_view to_string(OutcomeTag tag) {
  switch (tag) {
    case OutcomeTag::Pinned: return "Pinned";
    case OutcomeTag::Ballistic: return "Ballistic";
    case OutcomeTag::Undecided: return "Undecided";
  }
  return "?";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Stuck: return "stuck";
    case StopReason::Escaped: return "escaped";
    case StopReason::TimeLimit: return "time_limit";
    case StopReason::Arrested: return "arrested";
    case StopReason::SlopeCap: return "slope_cap";
  }
  return "?";
}

FrontSolver::FrontSolver(ObstacleField& field, const KineticRelation& kinetics, double slope_max)
    : field_(&field), kinetics_(kinetics), slope_max_(slope_max) {
  kinetics_.validate();
}

void FrontSolver::rebuild_columns(const FrontState& state) {
  n_ = state.size();
  dx_ = state.dx;
  x_offset_ = state.x_offset;
  generation_ = field_->generation();
  const double r1 = field_->params().r1;
  const double r1sq = r1 * r1;
  columns_.assign(n_, {});
  std::vector<double> xs(n_);
  for (std::size_t i = 0; i < n_; ++i) xs[i] = field_->wrap_x(state.x(i));
  const auto centers = field_->centers();
  const double W = field_->domain().width;
  const bool tiles = std::abs(static_cast<double>(n_) * dx_ - W) <= 1e-12 * W;
  const auto reach = static_cast<std::int64_t>(std::ceil(r1 / dx_)) + 1;
  const auto n = static_cast<std::int64_t>(n_);
  for (const Point& c : centers) {
    auto visit = [&](std::size_t i) {
      const double dx = field_->periodic_dx(xs[i], c.x);
      if (dx * dx <= r1sq) columns_[i].push_back({c.y, dx * dx});
    };
    if (tiles && 2 * reach + 1 < n) {
      const auto mid = static_cast<std::int64_t>(std::floor(field_->periodic_dx(c.x, xs[0]) / dx_));
      for (std::int64_t j = mid - reach; j <= mid + reach; ++j) {
        visit(static_cast<std::size_t>(((j % n) + n) % n));
      }
    } else {
      for (std::size_t i = 0; i < n_; ++i) visit(i);
    }
  }
  for (auto& col : columns_) {
    std::sort(col.begin(), col.end(), [](const ColumnEntry& a, const ColumnEntry& b) {
      return a.y < b.y || (a.y == b.y && a.dx2 < b.dx2);
    });
  }
}

void FrontSolver::prepare(const FrontState& state) {
  if (state.size() < 3) throw ValidationError("front needs at least 3 nodes");
  const auto [lo_it, hi_it] = std::minmax_element(state.heights.begin(), state.heights.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!field_->covers(lo, hi)) {
    if (field_->mode() == ObstacleField::Mode::Generated) {
      // Extend a full strip ahead so that extensions stay rare.
      field_->ensure_band(lo, hi + field_->strip_height());
    } else {
      std::ostringstream msg;
      msg << "front heights [" << lo << ", " << hi << "] leave the fixed obstacle band";
      throw OutOfBand(msg.str());
    }
  }
  if (state.size() != n_ || state.dx != dx_ || state.x_offset != x_offset_ ||
      field_->generation() != generation_) {
    rebuild_columns(state);
  }
}

double FrontSolver::node_phi(std::size_t i, double y) {
  const auto& col = columns_[i];
  if (col.empty()) return 0.0;
  const auto& p = field_->params();
  const double r1 = p.r1;
  auto it = std::lower_bound(col.begin(), col.end(), y - r1,
                             [](const ColumnEntry& e, double v) { return e.y < v; });
  double dmin2 = std::numeric_limits<double>::infinity();
  for (; it != col.end() && it->y <= y + r1; ++it) {
    const double dy = y - it->y;
    const double d2 = it->dx2 + dy * dy;
    if (d2 < dmin2) dmin2 = d2;
  }
  if (!(dmin2 <= r1 * r1)) return 0.0;
  if (dmin2 <= p.r0 * p.r0) return p.f;
  return p.f * field_->profile()(std::sqrt(dmin2));
}

FrontSolver::StepInfo FrontSolver::advance(FrontState& state, double F, double dt) {
  prepare(state);
  const std::size_t n = n_;
  const double inv_dx = 1.0 / state.dx;
  const double half_inv_dx = 0.5 * inv_dx;
  auto& u = state.heights;
  flux_.resize(n);
  curvature_.resize(n);
  lambda_.resize(n);
  velocity_.resize(n);
  next_.resize(n);

  StepInfo info;
  // flux_[i] lives on the half node i + 1/2
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = (i + 1 == n) ? 0 : i + 1;
    const double s = (u[ip] - u[i]) * inv_dx;
    info.max_slope = std::max(info.max_slope, std::abs(s));
    flux_[i] = flux_of(s);
  }
  info.slope_exceeded = info.max_slope > slope_max_;

  bool all_stuck = true;
  double vmax = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t im = (i == 0) ? n - 1 : i - 1;
    const std::size_t ip = (i + 1 == n) ? 0 : i + 1;
    const double kappa = (flux_[i] - flux_[im]) * inv_dx;
    const double lambda = kinetics_.tau + node_phi(i, u[i]);
    const double v = prox_dry_friction(kappa + F, lambda, kinetics_.epsilon);
    curvature_[i] = kappa;
    lambda_[i] = lambda;
    velocity_[i] = v;
    if (v != 0.0) {
      all_stuck = false;
      vmax = std::max(vmax, std::abs(v));
      const double sc = (u[ip] - u[im]) * half_inv_dx;
      next_[i] = u[i] + dt * v * std::sqrt(1.0 + sc * sc);
    } else {
      next_[i] = u[i];
    }
    finite = finite && std::isfinite(next_[i]);
    lo = std::min(lo, next_[i]);
  }
  if (!finite) throw SimulationError("non-finite height during front step");
  u.swap(next_);
  state.time += dt;
  info.all_stuck = all_stuck;
  info.max_abs_velocity = vmax;
  info.min_height = lo;
  return info;
}

FrontState step(const FrontState& state, ObstacleField& field, const KineticRelation& kinetics,
                double F, double dt) {
  FrontSolver solver(field, kinetics);
  FrontState next = state;
  solver.advance(next, F, dt);
  return next;
}

Outcome run(ObstacleField& field, const KineticRelation& kinetics, double F, const SimConfig& cfg,
            const FrontState* initial, const SnapshotSink& sink) {
  cfg.validate();
  kinetics.validate();
  FrontState state;
  if (initial != nullptr) {
    state = *initial;
  } else {
    const double W = field.domain().width;
    const double dx_req = cfg.dx > 0.0 ? cfg.dx : default_dx(field.params());
    const std::size_t n = node_count(W, dx_req);
    state = FrontState::flat(n, W / static_cast<double>(n));
  }
  const double dt = resolved_dt(cfg, kinetics, state.dx);
  const double h_escape = resolved_escape_height(cfg, field.params());
  const auto max_steps = static_cast<std::uint64_t>(std::ceil(cfg.t_max / dt));

  FrontSolver solver(field, kinetics, cfg.slope_max);
  Outcome out;
  out.dt = dt;

  // Coarse history of the mean height, used for the late-time mean velocity.
  constexpr std::uint64_t kHistoryStride = 16;
  std::vector<std::pair<double, double>> history;
  history.emplace_back(state.time, state.mean_height());

  if (sink && cfg.snapshot_stride > 0) sink(state, 0);

  int stuck_run = 0;
  int slow_run = 0;
  std::uint64_t k = 0;
  while (true) {
    if (k >= max_steps) {
      out.tag = OutcomeTag::Undecided;
      out.reason = StopReason::TimeLimit;
      break;
    }
    const auto info = solver.advance(state, F, dt);
    ++k;
    out.last_max_velocity = info.max_abs_velocity;
    if (sink && cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) sink(state, k);
    if (k % kHistoryStride == 0) history.emplace_back(state.time, state.mean_height());

    if (info.slope_exceeded) {
      out.tag = OutcomeTag::Undecided;
      out.reason = StopReason::SlopeCap;
      break;
    }
    stuck_run = info.all_stuck ? stuck_run + 1 : 0;
    if (stuck_run >= cfg.pinned_confirm_steps) {
      out.tag = OutcomeTag::Pinned;
      out.reason = StopReason::Stuck;
      break;
    }
    slow_run = (!info.all_stuck && info.max_abs_velocity <= cfg.tol_v) ? slow_run + 1 : 0;
    if (slow_run >= cfg.pinned_confirm_steps) {
      out.tag = OutcomeTag::Undecided;
      out.reason = StopReason::Arrested;
      break;
    }
    if (info.min_height >= h_escape) {
      out.tag = OutcomeTag::Ballistic;
      out.reason = StopReason::Escaped;
      break;
    }
  }
  out.steps = k;
  out.t_decided = state.time;
  if (out.tag == OutcomeTag::Ballistic) {
    const double t_end = state.time;
    const double u_end = state.mean_height();
    const double t_from = 0.8 * t_end;
    auto it = std::lower_bound(history.begin(), history.end(), t_from,
                               [](const auto& e, double t) { return e.first < t; });
    if (it == history.end() || it->first >= t_end) it = history.begin();
    out.mean_velocity = (u_end - it->second) / (t_end - it->first);
  }
  out.final_state = std::move(state);
  return out;
}

bool verify_monotone(ObstacleField& field, const KineticRelation& kinetics, double F,
                     const FrontState& u0, const FrontState& v0, std::size_t steps, double dt) {
  if (u0.size() != v0.size() || u0.dx != v0.dx || u0.x_offset != v0.x_offset) {
    throw ValidationError("verify_monotone needs two states on the same grid");
  }
  for (std::size_t i = 0; i < u0.size(); ++i) {
    if (!(u0.heights[i] <= v0.heights[i])) throw ValidationError("verify_monotone needs u0 <= v0");
  }
  FrontSolver su(field, kinetics, std::numeric_limits<double>::infinity());
  FrontSolver sv(field, kinetics, std::numeric_limits<double>::infinity());
  FrontState u = u0, v = v0;
  for (std::size_t k = 0; k < steps; ++k) {
    su.advance(u, F, dt);
    sv.advance(v, F, dt);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (u.heights[i] > v.heights[i]) return false;
    }
  }
  return true;
}

}  // namespace depin
