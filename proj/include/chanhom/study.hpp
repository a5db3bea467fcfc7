#pragma once

#include "chanhom/config.hpp"
#include "chanhom/macrosim.hpp"
#include "chanhom/microsim.hpp"
#include "chanhom/twoscale.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace chanhom {

/// One row of report.csv.
struct ReportRow {
  double eps = 0.0;
  double e_chan = 0.0;
  double e_bulk_plus = 0.0;
  double e_bulk_minus = 0.0;
  double e_n = 0.0;
  double apriori_norm = 0.0;
  double shift_ratio = 0.0;  // NaN when the shift leaves the margin for this eps
};

struct EpsDiagnostics {
  double eps = 0.0;
  std::size_t steps = 0;
  double max_mass_residual = 0.0;
  std::optional<ShiftDiagnostic> shift;
  TraceInequality trace;  // final snapshot
  double trace_constant = 0.0;
  double seconds = 0.0;
};

struct MacroDiagnostics {
  std::size_t steps = 0;
  double max_balance_residual = 0.0;
  double max_trace_spread = 0.0;
  double max_mass_residual = 0.0;
  double seconds = 0.0;
};

struct StudyReport {
  std::vector<ReportRow> rows;
  std::vector<EpsDiagnostics> diagnostics;
  MacroDiagnostics macro;
  std::vector<std::filesystem::path> files;  // relative to the output directory
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides the config
  unsigned threads = 1;
  bool write = true;
};

// Problem builders shared by the study, the CLI and the tests.
std::shared_ptr<const MicroGeometry> micro_geometry_for(const StudyConfig& cfg, std::size_t eps_index);
MicroProblem micro_problem_for(const StudyConfig& cfg, std::size_t eps_index);
InterfaceLayout layout_for(const StudyConfig& cfg);
MacroProblem macro_problem_for(const StudyConfig& cfg, const DirichletOverride& dirichlet = {});

MicroTrajectory run_micro_for(const StudyConfig& cfg, std::size_t eps_index);
MacroTrajectory run_macro_for(const StudyConfig& cfg);

/// Report row of one eps from the two trajectories (no I/O).
ReportRow compute_row(const StudyConfig& cfg, std::size_t eps_index, const MicroTrajectory& micro,
                      const MacroTrajectory& macro);

/// Runs every eps (concurrently with `threads`) and the macro problem once,
/// then writes report.csv, diagnostics.csv, config.json, fields/*.csv and
/// manifest.json. Errors carry the eps that failed.
StudyReport run_study(const StudyConfig& cfg, const RunOptions& opts = {});

std::string report_csv(const std::vector<ReportRow>& rows);

/// Field dumps (17 significant digits) and their readers.
void write_micro_fields(const std::filesystem::path& file, const MicroTrajectory& traj);
void write_macro_fields(const std::filesystem::path& file, const MacroTrajectory& traj);
/// Per node: traces v+-_j and cell fluxes F+-_j of every snapshot.
void write_interface_fields(const std::filesystem::path& file, const MacroProblem& p, const MacroTrajectory& traj);
MicroTrajectory read_micro_fields(const std::filesystem::path& file, const StudyConfig& cfg, std::size_t eps_index);
MacroTrajectory read_macro_fields(const std::filesystem::path& file, const StudyConfig& cfg);

std::string micro_field_name(const StudyConfig& cfg, std::size_t eps_index);

struct Rederived {
  std::string csv;
  bool matches = false;  // equal to the stored report.csv
};

/// Recomputes report.csv from config.json and fields/ of a finished study.
Rederived rederive_report(const std::filesystem::path& dir);

struct OperatorCheck {
  double eps = 0.0;
  std::size_t fields = 0;
  IdentityResiduals worst;
};

/// Unfolding identities on `random_fields` random pairs per eps.
std::vector<OperatorCheck> verify_operators(const StudyConfig& cfg);

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& file);

std::string version_string();

}  // namespace chanhom
