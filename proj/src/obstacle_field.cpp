#include "depin/obstacle_field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <string>

#include <json.hpp>

#include "depin/errors.hpp"

namespace depin {

using nlohmann::json;

void ObstacleParams::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ValidationError("rho must be > 0");
  if (!(r0 > 0.0)) throw ValidationError("r0 must be > 0");
  if (!(r1 > r0)) {
    throw ValidationError("r1 must be > r0 (got r0 = " + std::to_string(r0) +
                          ", r1 = " + std::to_string(r1) + ")");
  }
  if (!(f >= 0.0) || !std::isfinite(f)) throw ValidationError("f must be >= 0");
}

double ObstacleParams::spacing() const { return 1.0 / std::sqrt(rho); }

std::vector<Point> sample_poisson(const ObstacleParams& params, const Rect& region, CounterRng& rng,
                                  double period) {
  std::vector<Point> out;
  const double area = region.area();
  if (area <= 0.0) return out;
  std::poisson_distribution<long long> count(params.rho * area);
  const long long n = count(rng);
  out.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    double x = rng.uniform(region.x0, region.x1);
    const double y = rng.uniform(region.y0, region.y1);
    if (period > 0.0) {
      x -= period * std::floor(x / period);
      if (x >= period) x = 0.0;
    }
    out.push_back({x, y});
  }
  return out;
}

ObstacleField::ObstacleField(const ObstacleParams& params, double width, double strip_height)
    : params_(params), mode_(Mode::Generated) {
  params_.validate();
  if (!(width > 0.0)) throw ValidationError("domain width must be > 0");
  strip_height_ = strip_height > 0.0 ? strip_height : kDefaultStripSpacings * params_.spacing();
  domain_.width = width;
  profile_ = std::make_shared<RadialProfile>(params_.r0, params_.r1);
  generate_strip(-1);
  generate_strip(0);
  strip_lo_ = -1;
  strip_hi_ = 0;
  domain_.y_min = -strip_height_;
  domain_.y_max = strip_height_;
  rebuild_index();
}

ObstacleField ObstacleField::with_centers(const ObstacleParams& params, double width,
                                          std::vector<Point> centers, double y_min, double y_max) {
  params.validate();
  if (!(width > 0.0)) throw ValidationError("domain width must be > 0");
  if (!(y_max > y_min)) throw ValidationError("band needs y_max > y_min");
  ObstacleField field;
  field.params_ = params;
  field.mode_ = Mode::Fixed;
  field.domain_ = Domain{width, y_min, y_max, true};
  field.strip_height_ = kDefaultStripSpacings * params.spacing();
  field.profile_ = std::make_shared<RadialProfile>(params.r0, params.r1);
  for (Point& p : centers) p.x = field.wrap_x(p.x);
  field.centers_ = std::move(centers);
  field.rebuild_index();
  return field;
}

void ObstacleField::generate_strip(std::int64_t k) {
  CounterRng rng(derive_seed(params_.seed, {k}));
  const double y0 = static_cast<double>(k) * strip_height_;
  const Rect strip{0.0, domain_.width, y0, y0 + strip_height_};
  auto pts = sample_poisson(params_, strip, rng, domain_.width);
  centers_.insert(centers_.end(), pts.begin(), pts.end());
  ++generation_;
}

void ObstacleField::extend_band(double new_y_max) {
  if (new_y_max <= domain_.y_max) return;
  if (mode_ == Mode::Fixed) throw OutOfBand("cannot extend a fixed obstacle field");
  const auto k_need = static_cast<std::int64_t>(std::ceil(new_y_max / strip_height_)) - 1;
  for (std::int64_t k = strip_hi_ + 1; k <= k_need; ++k) generate_strip(k);
  strip_hi_ = std::max(strip_hi_, k_need);
  domain_.y_max = static_cast<double>(strip_hi_ + 1) * strip_height_;
  rebuild_index();
}

void ObstacleField::ensure_band(double y_lo, double y_hi) {
  if (covers(y_lo, y_hi)) return;
  if (mode_ == Mode::Fixed) throw OutOfBand("query range outside fixed obstacle field band");
  const double r1 = params_.r1;
  const auto k_lo = static_cast<std::int64_t>(std::floor((y_lo - r1) / strip_height_));
  const auto k_hi = static_cast<std::int64_t>(std::floor((y_hi + r1) / strip_height_));
  bool changed = false;
  for (std::int64_t k = strip_lo_ - 1; k >= k_lo; --k) {
    generate_strip(k);
    changed = true;
  }
  for (std::int64_t k = strip_hi_ + 1; k <= k_hi; ++k) {
    generate_strip(k);
    changed = true;
  }
  strip_lo_ = std::min(strip_lo_, k_lo);
  strip_hi_ = std::max(strip_hi_, k_hi);
  domain_.y_min = static_cast<double>(strip_lo_) * strip_height_;
  domain_.y_max = static_cast<double>(strip_hi_ + 1) * strip_height_;
  if (changed) rebuild_index();
}

bool ObstacleField::covers(double y_lo, double y_hi) const {
  return y_lo - params_.r1 >= domain_.y_min && y_hi + params_.r1 <= domain_.y_max;
}

void ObstacleField::rebuild_index() {
  const double W = domain_.width;
  ncols_ = std::max(1, static_cast<int>(std::floor(W / params_.r1)));
  cell_w_ = W / ncols_;
  cell_h_ = params_.r1;
  cells_.clear();
  nrows_ = 0;
  if (centers_.empty()) return;
  double ylo = centers_.front().y, yhi = ylo;
  for (const Point& p : centers_) {
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  row_lo_ = static_cast<std::int64_t>(std::floor(ylo / cell_h_));
  nrows_ = static_cast<std::int64_t>(std::floor(yhi / cell_h_)) - row_lo_ + 1;
  cells_.assign(static_cast<std::size_t>(nrows_ * ncols_), {});
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const Point& p = centers_[i];
    const std::int64_t r = static_cast<std::int64_t>(std::floor(p.y / cell_h_)) - row_lo_;
    const int c = std::min(ncols_ - 1, static_cast<int>(p.x / cell_w_));
    cells_[static_cast<std::size_t>(r * ncols_ + c)].push_back(static_cast<std::uint32_t>(i));
  }
}

double ObstacleField::wrap_x(double x) const {
  const double W = domain_.width;
  if (x >= 0.0 && x < W) return x;
  double r = x - W * std::floor(x / W);
  if (r >= W) r = 0.0;
  return r;
}

double ObstacleField::periodic_dx(double a, double b) const {
  const double W = domain_.width;
  double d = a - b;
  if (d > 0.5 * W) {
    d -= W;
  } else if (d < -0.5 * W) {
    d += W;
  }
  return d;
}

double ObstacleField::single_obstacle(double distance) const {
  return params_.f * (*profile_)(distance);
}

double ObstacleField::phi(double x, double y) const {
  if (!covers(y, y)) {
    std::ostringstream msg;
    msg << "phi query at y=" << y << " outside band [" << domain_.y_min << ", " << domain_.y_max
        << "] (needs r1 margin)";
    throw OutOfBand(msg.str());
  }
  const double r0sq = params_.r0 * params_.r0;
  double best = 0.0;
  double dmin2 = std::numeric_limits<double>::infinity();
  for_each_near(x, y, params_.r1, [&](std::size_t, double d2) { dmin2 = std::min(dmin2, d2); });
  if (dmin2 <= r0sq) return params_.f;
  if (std::isfinite(dmin2)) best = (*profile_)(std::sqrt(dmin2));
  return params_.f * best;
}

std::vector<std::size_t> ObstacleField::centers_in(const Rect& rect) const {
  std::vector<std::size_t> out;
  const double W = domain_.width;
  const bool full_period = rect.x1 - rect.x0 >= W;
  const double a = wrap_x(rect.x0);
  const double span = rect.x1 - rect.x0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const Point& p = centers_[i];
    if (p.y < rect.y0 || p.y > rect.y1) continue;
    if (!full_period) {
      double off = p.x - a;
      if (off < 0.0) off += W;
      if (off > span) continue;
    }
    out.push_back(i);
  }
  return out;
}

double ObstacleField::nearest_sq(double x, double y, double radius) const {
  double best = std::numeric_limits<double>::infinity();
  for_each_near(x, y, radius, [&](std::size_t, double d2) { best = std::min(best, d2); });
  return best;
}

void ObstacleField::dump(std::ostream& os, const std::string& meta_json) const {
  json header;
  header["type"] = "header";
  header["params"] = {{"rho", params_.rho},
                      {"r0", params_.r0},
                      {"r1", params_.r1},
                      {"f", params_.f},
                      {"seed", params_.seed}};
  header["seed"] = params_.seed;
  header["width"] = domain_.width;
  header["y_min"] = std::isfinite(domain_.y_min) ? json(domain_.y_min) : json(nullptr);
  header["y_max"] = std::isfinite(domain_.y_max) ? json(domain_.y_max) : json(nullptr);
  header["strip_height"] = strip_height_;
  header["origin"] = (mode_ == Mode::Generated || origin_generated_) ? "generated" : "fixed";
  header["count"] = centers_.size();
  header["meta"] = json::parse(meta_json);
  os << header.dump() << '\n';
  for (const Point& p : centers_) {
    json rec = {{"x", p.x}, {"y", p.y}};
    os << rec.dump() << '\n';
  }
}

ObstacleField ObstacleField::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("field dump is empty");
  const json header = json::parse(line);
  if (header.value("type", "") != "header") throw ValidationError("field dump lacks header record");
  ObstacleParams p;
  const json& jp = header.at("params");
  p.rho = jp.at("rho").get<double>();
  p.r0 = jp.at("r0").get<double>();
  p.r1 = jp.at("r1").get<double>();
  p.f = jp.at("f").get<double>();
  p.seed = jp.at("seed").get<std::uint64_t>();
  const double inf = std::numeric_limits<double>::infinity();
  const double y_min = header.at("y_min").is_null() ? -inf : header.at("y_min").get<double>();
  const double y_max = header.at("y_max").is_null() ? inf : header.at("y_max").get<double>();
  std::vector<Point> centers;
  centers.reserve(header.value("count", std::size_t{0}));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    centers.push_back({rec.at("x").get<double>(), rec.at("y").get<double>()});
  }
  ObstacleField field = with_centers(p, header.at("width").get<double>(), std::move(centers), y_min, y_max);
  field.strip_height_ = header.at("strip_height").get<double>();
  field.origin_generated_ = header.value("origin", "fixed") == "generated";
  return field;
}

double nearest_obstacle_stats(const ObstacleField& field) {
  auto pts = std::vector<Point>(field.centers().begin(), field.centers().end());
  if (pts.size() < 2) throw ValidationError("nearest-neighbour statistics need at least 2 centers");
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.y < b.y; });
  const Domain& dom = field.domain();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dy = pts[j].y - pts[i].y;
      if (dy * dy >= best2) break;
      const double dx = field.periodic_dx(pts[i].x, pts[j].x);
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    for (std::size_t j = i; j-- > 0;) {
      const double dy = pts[i].y - pts[j].y;
      if (dy * dy >= best2) break;
      const double dx = field.periodic_dx(pts[i].x, pts[j].x);
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    const double best = std::sqrt(best2);
    // A closer neighbour might exist outside the band.
    if (pts[i].y - best < dom.y_min || pts[i].y + best > dom.y_max) continue;
    sum += best;
    ++count;
  }
  if (count == 0) throw ValidationError("no center has its nearest neighbour inside the band");
  return sum / static_cast<double>(count);
}

}  // namespace depin
