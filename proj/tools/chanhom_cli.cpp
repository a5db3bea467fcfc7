#include "chanhom/config.hpp"
#include "chanhom/errors.hpp"
#include "chanhom/study.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace chanhom;

namespace {

struct Common {
  std::string config;
  std::string out;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
};

StudyConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("no config given (use <config> or --config)");
  StudyConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

void add_common(CLI::App* sub, Common& c, bool with_out) {
  sub->add_option("file", c.config, "study configuration (JSON)");
  sub->add_option("--config", c.config, "study configuration (JSON)");
  if (with_out) sub->add_option("--out", c.out, "output directory");
  sub->add_option("--threads", c.threads, "parallel runs across eps")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "seed for randomized checks");
}

int cmd_run(const Common& c) {
  const StudyConfig cfg = load(c);
  RunOptions opts;
  opts.threads = c.threads;
  opts.out_dir = cfg.out_dir;
  const StudyReport rep = run_study(cfg, opts);
  std::cout << report_csv(rep.rows);
  std::cout << "wrote " << rep.files.size() + 1 << " files to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_verify(const Common& c) {
  const StudyConfig cfg = load(c);
  double worst = 0.0;
  for (const auto& r : verify_operators(cfg)) {
    std::printf("eps=%-8g fields=%zu isometry=%.3e boundary=%.3e gradient=%.3e adjoint=%.3e round_trip=%.3e "
                "commutation=%.3e norm_bound=%.3e\n",
                r.eps, r.fields, r.worst.isometry, r.worst.boundary_norm, r.worst.gradient, r.worst.adjoint,
                r.worst.round_trip, r.worst.commutation, r.worst.norm_bound);
    worst = std::max(worst, r.worst.max());
  }
  std::printf("max identity residual %.3e\n", worst);
  if (!(worst <= 1e-12)) {
    std::fprintf(stderr, "identity residual above 1e-12\n");
    return 2;
  }
  return 0;
}

int cmd_micro(const Common& c) {
  const StudyConfig cfg = load(c);
  fs::create_directories(fs::path(cfg.out_dir) / "fields");
  for (std::size_t i = 0; i < cfg.epsilon.size(); ++i) {
    const auto traj = run_micro_for(cfg, i);
    const fs::path file = fs::path(cfg.out_dir) / "fields" / micro_field_name(cfg, i);
    write_micro_fields(file, traj);
    std::printf("eps=%s steps=%zu cells=%zu max_mass_residual=%.3e apriori_norm=%.6g -> %s\n",
                to_string(cfg.epsilon[i]).c_str(), traj.steps, traj.grid->active_count(), traj.max_mass_residual,
                apriori_norm(traj), file.string().c_str());
  }
  return 0;
}

int cmd_macro(const Common& c) {
  const StudyConfig cfg = load(c);
  fs::create_directories(fs::path(cfg.out_dir) / "fields");
  const auto traj = run_macro_for(cfg);
  const fs::path file = fs::path(cfg.out_dir) / "fields" / "macro.csv";
  write_macro_fields(file, traj);
  std::printf("nodes=%zu steps=%zu unknowns=%zu max_balance_residual=%.3e max_trace_spread=%.3e "
              "max_mass_residual=%.3e -> %s\n",
              traj.layout.nodes, traj.steps, traj.layout.unknowns(), traj.max_balance_residual, traj.max_trace_spread,
              traj.max_mass_residual, file.string().c_str());
  return 0;
}

int cmd_report(const std::string& dir) {
  const Rederived r = rederive_report(dir);
  std::cout << r.csv;
  if (!r.matches) {
    std::fprintf(stderr, "re-derived report differs from %s/report.csv\n", dir.c_str());
    return 2;
  }
  std::printf("matches stored report.csv\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro/macro simulator for reaction-diffusion through a thin channel layer", "chanhom"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Common run_c, verify_c, micro_c, macro_c;
  std::string report_dir;
  auto* run = app.add_subcommand("run", "eps sweep, macro run, report and manifest");
  add_common(run, run_c, true);
  auto* verify = app.add_subcommand("verify-operators", "unfolding identity suite");
  add_common(verify, verify_c, false);
  auto* micro = app.add_subcommand("micro", "micro runs only");
  add_common(micro, micro_c, true);
  auto* macro = app.add_subcommand("macro", "macro run only");
  add_common(macro, macro_c, true);
  auto* report = app.add_subcommand("report", "re-derive report.csv from stored fields");
  report->add_option("dir", report_dir, "study output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*run) return cmd_run(run_c);
    if (*verify) return cmd_verify(verify_c);
    if (*micro) return cmd_micro(micro_c);
    if (*macro) return cmd_macro(macro_c);
    if (*report) return cmd_report(report_dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
