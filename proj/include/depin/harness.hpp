#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "depin/config.hpp"

namespace depin {

inline constexpr const char* kToolVersion = "depin 0.1.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitRuntime = 3 };

/// Subcommand names understood by run_experiment.
const std::vector<std::string>& subcommands();

/// Runs one subcommand and writes its artifacts into cfg.out (created when
/// missing). Progress goes to `log`. Throws ValidationError or other
/// exceptions on failure.
void run_experiment(const std::string& command, const ExperimentConfig& cfg, std::ostream& log);

/// run_experiment with exceptions mapped to exit codes (message on `err`).
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log,
                std::ostream& err);

struct SandwichRow {
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  SandwichReport report;
};

struct Report {
  nlohmann::json summary;
  std::string plot_csv;  // log_rho, log_gap, fit_log_gap per fitted density
};

/// Summary of a finished study: fit, interval, per-density table, excluded
/// densities and the certificate sandwich pass rate. Throws ValidationError
/// for an empty study.
Report emit_report(const ScalingStudy& study, const std::vector<SandwichRow>& sandwich = {});

/// CSV of one row per (rho, seed) cell, preceded by '#' metadata lines.
void write_scaling_csv(std::ostream& os, const ScalingStudy& study, const ExperimentConfig& cfg);
/// Inverse of write_scaling_csv; rebuilds the study with cfg's fit settings.
ScalingStudy read_scaling_csv(std::istream& is, const ExperimentConfig& cfg);

void write_sandwich_csv(std::ostream& os, const std::vector<SandwichRow>& rows,
                        const ExperimentConfig& cfg);
std::vector<SandwichRow> read_sandwich_csv(std::istream& is);

/// RFC 4180 quoting when the field holds a comma, quote or line break.
std::string csv_field(const std::string& s);
/// Splits one CSV record honouring quotes.
std::vector<std::string> split_csv(const std::string& line);
/// Shortest-roundtrip-safe decimal text of a double (%.17g).
std::string format_double(double v);

}  // namespace depin
