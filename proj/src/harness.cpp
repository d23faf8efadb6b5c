#include "depin/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "depin/errors.hpp"
#include "depin/rng.hpp"

namespace depin {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"field-gen",     "simulate",      "critical",
                                              "scaling",       "certify-lower", "certify-upper",
                                              "sandwich",      "report"};
  return names;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::optional<double> opt_parse(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_meta_lines(std::ostream& os, const ExperimentConfig& cfg) {
  os << "# " << kToolVersion << '\n'
     << "# config_hash=" << cfg.hash() << '\n'
     << "# seed=" << cfg.obstacles.seed << '\n';
}

json meta_json(const ExperimentConfig& cfg) {
  json config = cfg.to_json();
  config.erase("workers");
  config.erase("out");
  return json{{"version", kToolVersion},
              {"config_hash", cfg.hash()},
              {"seed", cfg.obstacles.seed},
              {"config", config},
              {"provenance", cfg.provenance}};
}

// Data lines of a CSV written by this tool: comments dropped, header kept first.
std::vector<std::string> data_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

std::map<std::string, std::size_t> header_index(const std::string& header) {
  std::map<std::string, std::size_t> idx;
  const auto cols = split_csv(header);
  for (std::size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = i;
  return idx;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimulationError("cannot write " + path.string());
  out << text;
  if (!out) throw SimulationError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

ObstacleParams cell_params(const ExperimentConfig& cfg, std::uint64_t seed) {
  ObstacleParams p = cfg.obstacles;
  p.seed = seed;
  return p;
}

json estimate_json(const CriticalEstimate& est) {
  json probes = json::array();
  for (const auto& p : est.log) {
    probes.push_back({{"F", p.F}, {"tag", to_string(p.tag)}, {"reason", to_string(p.reason)},
                      {"t_decided", p.t_decided}});
  }
  return json{{"F_crit", est.f_crit},       {"bracket", {est.f_pin, est.f_ball}},
              {"undecided_count", est.undecided}, {"converged", est.converged},
              {"seed", est.seed},           {"probes", probes}};
}

json sandwich_json(const SandwichReport& r) {
  return json{{"F_lb", opt_json(r.f_lb)},   {"F_hat", opt_json(r.f_hat)},
              {"F_ub", opt_json(r.f_ub)},   {"path_h", opt_json(r.path_h)},
              {"holds", r.holds},           {"one_sided", r.one_sided},
              {"undecided_count", r.undecided}, {"note", r.note}};
}

json analytic_json(const ExperimentConfig& cfg) {
  const auto b = analytic_bounds(cfg.obstacles, cfg.kinetics.tau, cfg.p_c);
  return json{{"F_lb", b.f_lb}, {"F_ub", b.f_ub}, {"p_c", cfg.p_c}};
}

void cmd_field_gen(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  ObstacleField field(cfg.obstacles, cfg.resolved_width());
  field.ensure_band(0.0, resolved_escape_height(cfg.sim, cfg.obstacles));
  std::ostringstream text;
  field.dump(text, meta_json(cfg).dump());
  write_text(out / "field.jsonl", text.str());
  log << "field-gen: " << field.centers().size() << " centers in band [" << field.domain().y_min
      << ", " << field.domain().y_max << "]\n";
}

void cmd_simulate(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  if (!cfg.force) throw ValidationError("config key 'F': required by simulate");
  ObstacleField field(cfg.obstacles, cfg.resolved_width());
  std::ostringstream traj;
  SnapshotSink sink;
  if (cfg.sim.snapshot_stride > 0) {
    write_meta_lines(traj, cfg);
    bool header = false;
    sink = [&](const FrontState& s, std::uint64_t) {
      if (!header) {
        traj << 't';
        for (std::size_t i = 0; i < s.size(); ++i) traj << ",u" << i;
        traj << '\n';
        header = true;
      }
      traj << format_double(s.time);
      for (double u : s.heights) traj << ',' << format_double(u);
      traj << '\n';
    };
  }
  const Outcome o = run(field, cfg.kinetics, *cfg.force, cfg.sim, nullptr, sink);
  json j = meta_json(cfg);
  j["outcome"] = {{"tag", to_string(o.tag)},
                  {"reason", to_string(o.reason)},
                  {"t_decided", o.t_decided},
                  {"mean_velocity", std::isfinite(o.mean_velocity) ? json(o.mean_velocity) : json(nullptr)},
                  {"steps", o.steps},
                  {"dt", o.dt},
                  {"nodes", o.final_state.size()},
                  {"dx", o.final_state.dx},
                  {"last_max_velocity", o.last_max_velocity},
                  {"F", *cfg.force}};
  write_json(out / "outcome.json", j);
  if (cfg.sim.snapshot_stride > 0) write_text(out / "trajectory.csv", traj.str());
  log << "simulate: " << to_string(o.tag) << " (" << to_string(o.reason) << ") at t=" << o.t_decided
      << '\n';
}

void cmd_critical(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  ObstacleField field(cfg.obstacles, cfg.resolved_width());
  const auto est = estimate_critical(field, cfg.kinetics, cfg.sim, cfg.bisection);
  json j = meta_json(cfg);
  j["estimate"] = estimate_json(est);
  write_json(out / "critical.json", j);
  log << "critical: F_crit=" << est.f_crit << " bracket [" << est.f_pin << ", " << est.f_ball << "]\n";
}

void cmd_scaling(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  const ScalingStudy study = scaling_sweep(cfg.sweep());
  std::ostringstream csv;
  write_scaling_csv(csv, study, cfg);
  write_text(out / "scaling.csv", csv.str());
  const Report rep = emit_report(study);
  json j = meta_json(cfg);
  j["study"] = rep.summary;
  write_json(out / "scaling_summary.json", j);
  if (study.fit) {
    log << "scaling: slope=" << study.fit->slope << " CI [" << study.ci_lo << ", " << study.ci_hi
        << "]\n";
  } else {
    log << "scaling: no fit (" << study.note << ")\n";
  }
}

void cmd_certify_lower(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  ObstacleField field(cfg.obstacles, cfg.resolved_width());
  BarrierConfig bc = cfg.sandwich().barrier;
  const auto cert = best_lower_certificate(field, cfg.kinetics.tau, bc);
  json j = meta_json(cfg);
  j["found"] = cert.has_value();
  if (cert) j["certificate"] = to_json(*cert);
  j["analytic"] = analytic_json(cfg);
  write_text(out / "lower_cert.jsonl", j.dump() + "\n");
  if (cert) {
    log << "certify-lower: F_certified=" << cert->f_certified << '\n';
  } else {
    log << "certify-lower: no barrier found\n";
  }
}

void cmd_certify_upper(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  ObstacleField field(cfg.obstacles, cfg.resolved_width());
  const auto sw = cfg.sandwich();
  const double dx = cfg.sim.dx > 0.0 ? cfg.sim.dx : default_dx(cfg.obstacles);
  const double h_min = sw.path_h_min > 0.0 ? sw.path_h_min : dx;
  const double height =
      sw.path_height > 0.0 ? sw.path_height : resolved_escape_height(cfg.sim, cfg.obstacles);
  auto path = best_free_path(field, h_min, height, cfg.kinetics.tau);
  json j = meta_json(cfg);
  j["found"] = path.has_value();
  if (path) {
    const double tau = cfg.kinetics.tau;
    const double F = (cfg.force && *cfg.force > path->f_ub) ? *cfg.force
                                                            : path->f_ub + 0.05 * (path->f_ub - tau);
    path->v0 = (F - path->f_ub) / cfg.kinetics.epsilon;
    const auto evo = construct_path_evolution(path->h, F, path->v0, cfg.kinetics.epsilon, tau);
    j["certificate"] = to_json(*path);
    j["recheck"] = recheck_path(field, *path);
    j["evolution"] = to_json(evo);
    j["evolution"]["F"] = F;
    log << "certify-upper: F_ub=" << path->f_ub << " with h=" << path->h << '\n';
  } else {
    log << "certify-upper: no free path with h >= " << h_min << '\n';
  }
  j["analytic"] = analytic_json(cfg);
  write_text(out / "upper_cert.jsonl", j.dump() + "\n");
}

std::vector<SandwichRow> run_sandwich_cells(const ExperimentConfig& cfg) {
  std::vector<SandwichRow> rows(cfg.n_seeds);
  const auto sw = cfg.sandwich();
  parallel_for(cfg.n_seeds, cfg.workers, [&](std::size_t s) {
    const std::uint64_t seed =
        derive_seed(cfg.obstacles.seed, {0, static_cast<std::int64_t>(s)});
    ObstacleField field(cell_params(cfg, seed), cfg.resolved_width());
    rows[s] = {s, seed, certificate_sandwich(field, cfg.kinetics, cfg.sim, cfg.bisection, sw)};
  });
  return rows;
}

void cmd_sandwich(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto rows = run_sandwich_cells(cfg);
  std::ostringstream csv;
  write_sandwich_csv(csv, rows, cfg);
  write_text(out / "sandwich.csv", csv.str());
  std::size_t passes = 0;
  for (const auto& r : rows) passes += r.report.holds && !r.report.one_sided;
  json j = meta_json(cfg);
  j["attempts"] = rows.size();
  j["passes"] = passes;
  j["pass_rate"] = static_cast<double>(passes) / static_cast<double>(rows.size());
  j["analytic"] = analytic_json(cfg);
  json cells = json::array();
  for (const auto& r : rows) {
    json c = sandwich_json(r.report);
    c["seed_index"] = r.seed_index;
    c["seed"] = r.seed;
    cells.push_back(c);
  }
  j["cells"] = cells;
  write_json(out / "sandwich_summary.json", j);
  log << "sandwich: " << passes << "/" << rows.size() << " seeds satisfy F_lb <= F_hat <= F_ub\n";
}

void cmd_report(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  std::ifstream in(out / "scaling.csv");
  if (!in) throw ValidationError("report needs a finished study: " + (out / "scaling.csv").string());
  const ScalingStudy study = read_scaling_csv(in, cfg);
  std::vector<SandwichRow> sandwich;
  std::ifstream sin(out / "sandwich.csv");
  if (sin) sandwich = read_sandwich_csv(sin);
  Report rep = emit_report(study, sandwich);
  json j = meta_json(cfg);
  j["report"] = rep.summary;
  write_json(out / "report.json", j);
  std::ostringstream plot;
  write_meta_lines(plot, cfg);
  plot << rep.plot_csv;
  write_text(out / "plot.csv", plot.str());
  log << "report: written to " << (out / "report.json").string() << '\n';
}

}  // namespace

void run_experiment(const std::string& command, const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out(cfg.out);
  fs::create_directories(out);
  if (command == "field-gen") return cmd_field_gen(cfg, out, log);
  if (command == "simulate") return cmd_simulate(cfg, out, log);
  if (command == "critical") return cmd_critical(cfg, out, log);
  if (command == "scaling") return cmd_scaling(cfg, out, log);
  if (command == "certify-lower") return cmd_certify_lower(cfg, out, log);
  if (command == "certify-upper") return cmd_certify_upper(cfg, out, log);
  if (command == "sandwich") return cmd_sandwich(cfg, out, log);
  if (command == "report") return cmd_report(cfg, out, log);
  throw ValidationError("unknown subcommand '" + command + "'");
}

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log,
                std::ostream& err) {
  try {
    run_experiment(command, cfg, log);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

Report emit_report(const ScalingStudy& study, const std::vector<SandwichRow>& sandwich) {
  if (study.densities.empty()) throw ValidationError("cannot report on an empty study");
  Report rep;
  json& s = rep.summary;
  s["version"] = kToolVersion;
  s["tau"] = study.tau;
  if (study.fit) {
    s["fit"] = {{"slope", study.fit->slope},
                {"intercept", study.fit->intercept},
                {"points", study.fit->points}};
  } else {
    s["fit"] = nullptr;
  }
  s["ci95"] = study.fit ? json{study.ci_lo, study.ci_hi} : json(nullptr);
  s["bootstrap"] = study.bootstrap;
  json table = json::array();
  json excluded = json::array();
  std::ostringstream plot;
  plot << "log_rho,log_gap,fit_log_gap\n";
  for (const auto& d : study.densities) {
    table.push_back({{"rho", d.rho},
                     {"mean_gap", d.mean_gap},
                     {"stderr_gap", d.stderr_gap},
                     {"succeeded", d.succeeded},
                     {"seeds", d.estimates.size()},
                     {"excluded", d.excluded}});
    if (d.excluded) {
      json fails = json::array();
      for (const auto& f : d.failures) {
        if (!f.empty()) fails.push_back(f);
      }
      excluded.push_back({{"rho", d.rho}, {"reason", d.note}, {"failures", fails}});
      continue;
    }
    const double lr = std::log(d.rho);
    plot << format_double(lr) << ',' << format_double(std::log(d.mean_gap)) << ','
         << (study.fit ? format_double(study.fit->intercept + study.fit->slope * lr) : "") << '\n';
  }
  s["densities"] = table;
  s["excluded"] = excluded;
  if (!sandwich.empty()) {
    std::size_t passes = 0, one_sided = 0;
    for (const auto& r : sandwich) {
      passes += r.report.holds && !r.report.one_sided;
      one_sided += r.report.one_sided;
    }
    s["sandwich"] = {{"attempts", sandwich.size()},
                     {"passes", passes},
                     {"one_sided", one_sided},
                     {"pass_rate", static_cast<double>(passes) / static_cast<double>(sandwich.size())}};
  } else {
    s["sandwich"] = nullptr;
  }
  s["note"] = study.note;
  rep.plot_csv = plot.str();
  return rep;
}

void write_scaling_csv(std::ostream& os, const ScalingStudy& study, const ExperimentConfig& cfg) {
  write_meta_lines(os, cfg);
  os << "rho_index,rho,seed_index,seed,F_crit,bracket_lo,bracket_hi,undecided_count,probes,converged,status\n";
  for (const auto& d : study.densities) {
    for (std::size_t s = 0; s < d.estimates.size(); ++s) {
      const auto& est = d.estimates[s];
      const std::uint64_t seed = est ? est->seed
                                     : derive_seed(cfg.obstacles.seed,
                                                   {static_cast<std::int64_t>(d.rho_index),
                                                    static_cast<std::int64_t>(s)});
      os << d.rho_index << ',' << format_double(d.rho) << ',' << s << ',' << seed << ',';
      if (est) {
        os << format_double(est->f_crit) << ',' << format_double(est->f_pin) << ','
           << format_double(est->f_ball) << ',' << est->undecided << ',' << est->log.size() << ','
           << (est->converged ? 1 : 0) << ",ok\n";
      } else {
        os << ",,,,,," << csv_field(d.failures[s].empty() ? "failed" : d.failures[s]) << '\n';
      }
    }
  }
}

ScalingStudy read_scaling_csv(std::istream& is, const ExperimentConfig& cfg) {
  const auto lines = data_lines(is);
  if (lines.empty()) throw ValidationError("scaling CSV holds no header");
  const auto col = header_index(lines.front());
  for (const char* k : {"rho_index", "rho", "seed_index", "seed", "F_crit", "bracket_lo",
                        "bracket_hi", "undecided_count", "status"}) {
    if (!col.count(k)) throw ValidationError(std::string("scaling CSV lacks column ") + k);
  }
  struct Row {
    std::size_t rho_index, seed_index;
    double rho;
    std::optional<CriticalEstimate> est;
    std::string failure;
  };
  std::vector<Row> rows;
  std::size_t nd = 0, ns = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    if (f.size() < col.size()) throw ValidationError("scaling CSV row " + std::to_string(i) + " is short");
    Row r;
    r.rho_index = std::stoul(f[col.at("rho_index")]);
    r.seed_index = std::stoul(f[col.at("seed_index")]);
    r.rho = std::stod(f[col.at("rho")]);
    if (f[col.at("status")] == "ok") {
      CriticalEstimate e;
      e.f_crit = std::stod(f[col.at("F_crit")]);
      e.f_pin = std::stod(f[col.at("bracket_lo")]);
      e.f_ball = std::stod(f[col.at("bracket_hi")]);
      e.undecided = std::stoi(f[col.at("undecided_count")]);
      e.seed = std::stoull(f[col.at("seed")]);
      e.converged = col.count("converged") ? f[col.at("converged")] == "1" : true;
      r.est = e;
    } else {
      r.failure = f[col.at("status")];
    }
    nd = std::max(nd, r.rho_index + 1);
    ns = std::max(ns, r.seed_index + 1);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("cannot report on an empty study");
  SweepConfig sc = cfg.sweep();
  sc.densities.assign(nd, 0.0);
  sc.n_seeds = ns;
  std::vector<std::optional<CriticalEstimate>> results(nd * ns);
  std::vector<std::string> failures(nd * ns, "missing from CSV");
  for (auto& r : rows) {
    sc.densities[r.rho_index] = r.rho;
    const std::size_t idx = r.rho_index * ns + r.seed_index;
    results[idx] = r.est;
    failures[idx] = r.failure;
  }
  for (double rho : sc.densities) {
    if (!(rho > 0.0)) throw ValidationError("scaling CSV misses a density index");
  }
  return aggregate_study(sc, results, failures);
}

void write_sandwich_csv(std::ostream& os, const std::vector<SandwichRow>& rows,
                        const ExperimentConfig& cfg) {
  write_meta_lines(os, cfg);
  os << "seed_index,seed,F_lb,F_hat,F_ub,path_h,holds,one_sided,undecided_count,note\n";
  for (const auto& r : rows) {
    const auto& s = r.report;
    os << r.seed_index << ',' << r.seed << ',' << opt_text(s.f_lb) << ',' << opt_text(s.f_hat) << ','
       << opt_text(s.f_ub) << ',' << opt_text(s.path_h) << ',' << (s.holds ? 1 : 0) << ','
       << (s.one_sided ? 1 : 0) << ',' << s.undecided << ',' << csv_field(s.note) << '\n';
  }
}

std::vector<SandwichRow> read_sandwich_csv(std::istream& is) {
  const auto lines = data_lines(is);
  std::vector<SandwichRow> rows;
  if (lines.empty()) return rows;
  const auto col = header_index(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    if (f.size() < col.size()) throw ValidationError("sandwich CSV row " + std::to_string(i) + " is short");
    SandwichRow r;
    r.seed_index = std::stoul(f[col.at("seed_index")]);
    r.seed = std::stoull(f[col.at("seed")]);
    r.report.f_lb = opt_parse(f[col.at("F_lb")]);
    r.report.f_hat = opt_parse(f[col.at("F_hat")]);
    r.report.f_ub = opt_parse(f[col.at("F_ub")]);
    r.report.path_h = opt_parse(f[col.at("path_h")]);
    r.report.holds = f[col.at("holds")] == "1";
    r.report.one_sided = f[col.at("one_sided")] == "1";
    r.report.undecided = std::stoi(f[col.at("undecided_count")]);
    r.report.note = f[col.at("note")];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace depin
