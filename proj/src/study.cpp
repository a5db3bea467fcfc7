#include "chanhom/study.hpp"

#include "chanhom/errors.hpp"

#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#ifndef CHANHOM_VERSION
#define CHANHOM_VERSION "0.0.0"
#endif

namespace chanhom {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Re-throws the active exception with the failing eps prepended, keeping the
// validation/numerical split that decides the exit status.
[[noreturn]] void rethrow_with(const std::string& prefix) {
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + file.string() + "'");
  out << text;
  if (!out) throw ValidationError("write failed for '" + file.string() + "'");
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + file.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits a CSV line without quoting (field files never quote).
std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double parse_double(std::string_view s, const fs::path& file) {
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end == tmp.c_str() || *end != '\0') throw ValidationError("bad number '" + tmp + "' in " + file.string());
  return v;
}

std::size_t parse_index(std::string_view s, const fs::path& file) {
  const double v = parse_double(s, file);
  if (v < 0 || v != std::floor(v)) throw ValidationError("bad index in " + file.string());
  return static_cast<std::size_t>(v);
}

std::string diagnostics_csv(const StudyReport& r) {
  std::ostringstream os;
  os << "eps,steps,max_mass_residual,shift_lhs,shift_rhs,trace_lhs,trace_rhs,trace_constant\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& d : r.diagnostics) {
    os << fmt(d.eps) << ',' << d.steps << ',' << fmt(d.max_mass_residual) << ','
       << fmt(d.shift ? d.shift->lhs : nan) << ',' << fmt(d.shift ? d.shift->rhs : nan) << ',' << fmt(d.trace.lhs)
       << ',' << fmt(d.trace.rhs()) << ',' << fmt(d.trace_constant) << '\n';
  }
  os << "# macro steps=" << r.macro.steps << " max_balance_residual=" << fmt(r.macro.max_balance_residual)
     << " max_trace_spread=" << fmt(r.macro.max_trace_spread)
     << " max_mass_residual=" << fmt(r.macro.max_mass_residual) << '\n';
  return os.str();
}

}  // namespace

std::string version_string() { return CHANHOM_VERSION; }

std::shared_ptr<const MicroGeometry> micro_geometry_for(const StudyConfig& cfg, std::size_t i) {
  return std::make_shared<const MicroGeometry>(build_micro_geometry(to_double(cfg.epsilon.at(i)), cfg.height, cfg.cell));
}

MicroProblem micro_problem_for(const StudyConfig& cfg, std::size_t i) {
  return make_micro_problem(micro_geometry_for(cfg, i), cfg.k, cfg.diffusion, cfg.kinetics, cfg.grid);
}

InterfaceLayout layout_for(const StudyConfig& cfg) {
  return build_interface_layout(cfg.cell, cfg.height, cfg.sigma_nodes, cfg.m, cfg.bulk_sub, cfg.grid);
}

MacroProblem macro_problem_for(const StudyConfig& cfg, const DirichletOverride& dirichlet) {
  return make_macro_problem(layout_for(cfg), cfg.diffusion, cfg.kinetics, dirichlet);
}

MicroTrajectory run_micro_for(const StudyConfig& cfg, std::size_t i) {
  return run_micro(micro_problem_for(cfg, i), cfg.initial, cfg.final_time, cfg.dt(), cfg.stride);
}

MacroTrajectory run_macro_for(const StudyConfig& cfg) {
  return run_macro(macro_problem_for(cfg), cfg.initial, cfg.final_time, cfg.dt(), cfg.stride);
}

ReportRow compute_row(const StudyConfig& cfg, std::size_t i, const MicroTrajectory& micro,
                      const MacroTrajectory& macro) {
  const auto map = build_unfolding_map(micro.grid, macro.layout.cell_grid);
  const auto e = ts_error(micro, macro, map);
  ReportRow r;
  r.eps = to_double(cfg.epsilon.at(i));
  r.e_chan = e.e_chan;
  r.e_bulk_plus = e.e_bulk_plus;
  r.e_bulk_minus = e.e_bulk_minus;
  r.e_n = e.e_n;
  r.apriori_norm = apriori_norm(micro);
  if (std::abs(static_cast<double>(cfg.shift_l)) * r.eps <= 0.5 * cfg.shift_h + 1e-12)
    r.shift_ratio = shift_diagnostic(micro, cfg.shift_l, cfg.shift_h).ratio;
  else
    r.shift_ratio = std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "eps,E_chan,E_bulk_plus,E_bulk_minus,E_N,apriori_norm,shift_ratio\n";
  for (const auto& r : rows)
    os << fmt(r.eps) << ',' << fmt(r.e_chan) << ',' << fmt(r.e_bulk_plus) << ',' << fmt(r.e_bulk_minus) << ','
       << fmt(r.e_n) << ',' << fmt(r.apriori_norm) << ',' << fmt(r.shift_ratio) << '\n';
  return os.str();
}

std::string micro_field_name(const StudyConfig& cfg, std::size_t i) {
  return "micro_eps_1_" + std::to_string(cfg.columns(i)) + ".csv";
}

void write_micro_fields(const fs::path& file, const MicroTrajectory& traj) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + file.string() + "'");
  const RectGrid& g = *traj.grid;
  out << "snapshot,t,cell,x,y,region,u\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const Field& f = traj.snapshots[s];
    for (std::size_t a = 0; a < g.active_count(); ++a) {
      const Point2 c = g.center(a);
      out << s << ',' << fmt(f.time) << ',' << a << ',' << fmt(c.x) << ',' << fmt(c.y) << ',' << region_name(g.region(a))
          << ',' << fmt(f.values[a]) << '\n';
    }
  }
}

void write_macro_fields(const fs::path& file, const MacroTrajectory& traj) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + file.string() + "'");
  const InterfaceLayout& l = traj.layout;
  const std::size_t nb = l.bulk_count(), nc = l.cell_count();
  out << "snapshot,t,unknown,block,node,local,x,y,u\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const MacroState& st = traj.snapshots[s];
    const std::string t = fmt(st.t);
    for (std::size_t i = 0; i < st.x.size(); ++i) {
      std::string block;
      std::size_t node = 0, local = 0;
      Point2 p;
      if (i < nb) {
        block = l.bulk->region(i) == Region::BulkPlus ? "bulk+" : "bulk-";
        local = i;
        p = l.bulk->center(i);
        node = static_cast<std::size_t>(p.x / l.dsigma);
      } else if (i < nb + l.nodes * nc) {
        block = "cell";
        node = (i - nb) / nc;
        local = (i - nb) % nc;
        p = l.cell_grid->center(local);
      } else {
        const std::size_t q = i - nb - l.nodes * nc;
        block = q < l.nodes ? "trace+" : "trace-";
        node = q % l.nodes;
        p = Point2{l.node(node), 0.0};
      }
      out << s << ',' << t << ',' << i << ',' << block << ',' << node << ',' << local << ',' << fmt(p.x) << ','
          << fmt(p.y) << ',' << fmt(st.x[i]) << '\n';
    }
  }
}

void write_interface_fields(const fs::path& file, const MacroProblem& p, const MacroTrajectory& traj) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + file.string() + "'");
  const InterfaceLayout& l = traj.layout;
  out << "snapshot,t,j,xbar,v_plus,v_minus,F_plus,F_minus\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const MacroState& st = traj.snapshots[s];
    for (std::size_t j = 0; j < l.nodes; ++j) {
      const auto [fp, fm] = cell_flux(p, st, j);
      out << s << ',' << fmt(st.t) << ',' << j << ',' << fmt(l.node(j)) << ',' << fmt(st.trace(l, +1, j)) << ','
          << fmt(st.trace(l, -1, j)) << ',' << fmt(fp) << ',' << fmt(fm) << '\n';
    }
  }
}

MicroTrajectory read_micro_fields(const fs::path& file, const StudyConfig& cfg, std::size_t i) {
  const auto geom = micro_geometry_for(cfg, i);
  const auto grid = build_micro_grid(*geom, cfg.k, cfg.grid);
  MicroTrajectory traj;
  traj.grid = grid;
  traj.eps = geom->eps();
  traj.dt = cfg.dt();
  traj.steps = step_count(cfg.final_time, cfg.dt());
  std::istringstream in(read_text(file));
  std::string line;
  std::getline(in, line);
  if (line.rfind("snapshot,t,cell", 0) != 0) throw ValidationError("unexpected header in " + file.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line);
    if (cols.size() != 7) throw ValidationError("malformed row in " + file.string());
    const std::size_t s = parse_index(cols[0], file), a = parse_index(cols[2], file);
    if (s == traj.snapshots.size())
      traj.snapshots.emplace_back(grid, std::vector<double>(grid->active_count(), 0.0), parse_double(cols[1], file));
    if (s + 1 != traj.snapshots.size() || a >= grid->active_count())
      throw ValidationError("field file does not match the configured grid: " + file.string());
    traj.snapshots.back().values[a] = parse_double(cols[6], file);
  }
  return traj;
}

MacroTrajectory read_macro_fields(const fs::path& file, const StudyConfig& cfg) {
  MacroTrajectory traj;
  traj.layout = layout_for(cfg);
  traj.dt = cfg.dt();
  traj.steps = step_count(cfg.final_time, cfg.dt());
  const std::size_t n = traj.layout.unknowns();
  std::istringstream in(read_text(file));
  std::string line;
  std::getline(in, line);
  if (line.rfind("snapshot,t,unknown", 0) != 0) throw ValidationError("unexpected header in " + file.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line);
    if (cols.size() != 9) throw ValidationError("malformed row in " + file.string());
    const std::size_t s = parse_index(cols[0], file), i = parse_index(cols[2], file);
    if (s == traj.snapshots.size()) {
      MacroState st;
      st.t = parse_double(cols[1], file);
      st.x.assign(n, 0.0);
      traj.snapshots.push_back(std::move(st));
    }
    if (s + 1 != traj.snapshots.size() || i >= n)
      throw ValidationError("field file does not match the configured layout: " + file.string());
    traj.snapshots.back().x[i] = parse_double(cols[8], file);
  }
  return traj;
}

std::string sha256_file(const fs::path& file) {
  const std::string data = read_text(file);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 failed for " + file.string());
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

StudyReport run_study(const StudyConfig& cfg, const RunOptions& opts) {
  const std::size_t ne = cfg.epsilon.size();
  std::vector<MicroTrajectory> micro(ne);
  std::vector<double> micro_seconds(ne, 0.0);
  MacroTrajectory macro;
  double macro_seconds = 0.0;

  // Task 0 is the macro run, task i + 1 the micro run of eps i.
  std::vector<std::exception_ptr> errors(ne + 1);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t <= ne; t = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        try {
          if (t == 0) {
            macro = run_macro_for(cfg);
            macro_seconds = seconds_since(t0);
          } else {
            micro[t - 1] = run_micro_for(cfg, t - 1);
            micro_seconds[t - 1] = seconds_since(t0);
          }
        } catch (...) {
          rethrow_with(t == 0 ? std::string("macro run: ") : "eps=" + to_string(cfg.epsilon[t - 1]) + ": ");
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(ne + 1)));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  StudyReport rep;
  rep.macro.steps = macro.steps;
  rep.macro.max_balance_residual = macro.max_balance_residual;
  rep.macro.max_trace_spread = macro.max_trace_spread;
  rep.macro.max_mass_residual = macro.max_mass_residual;
  rep.macro.seconds = macro_seconds;

  const auto cal = calibrate_trace_constant(*macro.layout.cell_grid, cfg.theta);
  for (std::size_t i = 0; i < ne; ++i) {
    try {
      rep.rows.push_back(compute_row(cfg, i, micro[i], macro));
      EpsDiagnostics d;
      d.eps = rep.rows.back().eps;
      d.steps = micro[i].steps;
      d.max_mass_residual = micro[i].max_mass_residual;
      if (!std::isnan(rep.rows.back().shift_ratio)) d.shift = shift_diagnostic(micro[i], cfg.shift_l, cfg.shift_h);
      d.trace = trace_inequality_diagnostic(micro[i].snapshots.back(), cfg.theta, cal);
      d.trace_constant = cal.constant;
      d.seconds = micro_seconds[i];
      rep.diagnostics.push_back(d);
    } catch (...) {
      rethrow_with("eps=" + to_string(cfg.epsilon[i]) + ": ");
    }
  }
  if (!opts.write) return rep;

  const fs::path dir = opts.out_dir ? *opts.out_dir : fs::path(cfg.out_dir);
  fs::create_directories(dir / "fields");
  write_text(dir / "report.csv", report_csv(rep.rows));
  write_text(dir / "diagnostics.csv", diagnostics_csv(rep));
  write_text(dir / "config.json", config_echo(cfg) + "\n");
  rep.files = {"report.csv", "diagnostics.csv", "config.json"};
  for (std::size_t i = 0; i < ne; ++i) {
    const fs::path rel = fs::path("fields") / micro_field_name(cfg, i);
    write_micro_fields(dir / rel, micro[i]);
    rep.files.push_back(rel);
  }
  write_macro_fields(dir / "fields" / "macro.csv", macro);
  rep.files.push_back(fs::path("fields") / "macro.csv");
  write_interface_fields(dir / "fields" / "interface.csv", macro_problem_for(cfg), macro);
  rep.files.push_back(fs::path("fields") / "interface.csv");

  ojson m;
  m["name"] = cfg.name;
  m["config"] = ojson::parse(config_echo(cfg));
  m["versions"] = {{"chanhom", version_string()},
                   {"compiler", __VERSION__},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"openssl", OPENSSL_VERSION_TEXT}};
  ojson timings;
  timings["macro_seconds"] = rep.macro.seconds;
  ojson per = ojson::array();
  for (const auto& d : rep.diagnostics) per.push_back({{"eps", d.eps}, {"seconds", d.seconds}});
  timings["micro"] = per;
  timings["threads"] = nt;
  m["timings"] = timings;
  ojson files = ojson::array();
  for (const auto& f : rep.files)
    files.push_back({{"path", f.generic_string()}, {"sha256", sha256_file(dir / f)}, {"bytes", fs::file_size(dir / f)}});
  m["files"] = files;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return rep;
}

Rederived rederive_report(const fs::path& dir) {
  const StudyConfig cfg = load_config(dir / "config.json");
  const MacroTrajectory macro = read_macro_fields(dir / "fields" / "macro.csv", cfg);
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < cfg.epsilon.size(); ++i) {
    const MicroTrajectory micro = read_micro_fields(dir / "fields" / micro_field_name(cfg, i), cfg, i);
    rows.push_back(compute_row(cfg, i, micro, macro));
  }
  Rederived r;
  r.csv = report_csv(rows);
  if (fs::exists(dir / "report.csv")) r.matches = read_text(dir / "report.csv") == r.csv;
  return r;
}

std::vector<OperatorCheck> verify_operators(const StudyConfig& cfg) {
  std::vector<OperatorCheck> out;
  const auto cell_grid = build_cell_grid(*cfg.cell, cfg.m);
  for (std::size_t i = 0; i < cfg.epsilon.size(); ++i) {
    const auto geom = micro_geometry_for(cfg, i);
    const auto grid = build_micro_grid(*geom, cfg.k, cfg.grid);
    const auto map = build_unfolding_map(grid, cell_grid);
    std::mt19937_64 rng(cfg.seed + i);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    OperatorCheck c;
    c.eps = geom->eps();
    c.fields = cfg.random_fields;
    for (std::size_t f = 0; f < cfg.random_fields; ++f) {
      std::vector<double> v(grid->active_count());
      for (auto& x : v) x = dist(rng);
      TwoScaleField phi;
      phi.cell = cell_grid;
      phi.nodes = map.columns * (f % 2 == 0 ? 1 : 2);
      phi.eps = c.eps;
      phi.values.resize(phi.nodes * cell_grid->active_count());
      for (auto& x : phi.values) x = dist(rng);
      const auto r = check_unfolding_identities(map, Field(grid, std::move(v)), phi);
      c.worst.isometry = std::max(c.worst.isometry, r.isometry);
      c.worst.boundary_norm = std::max(c.worst.boundary_norm, r.boundary_norm);
      c.worst.gradient = std::max(c.worst.gradient, r.gradient);
      c.worst.adjoint = std::max(c.worst.adjoint, r.adjoint);
      c.worst.round_trip = std::max(c.worst.round_trip, r.round_trip);
      c.worst.commutation = std::max(c.worst.commutation, r.commutation);
      c.worst.norm_bound = std::max(c.worst.norm_bound, r.norm_bound);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace chanhom
