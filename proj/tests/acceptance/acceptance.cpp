// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include "chanhom/config.hpp"
#include "chanhom/errors.hpp"
#include "chanhom/macrosim.hpp"
#include "chanhom/microsim.hpp"
#include "chanhom/study.hpp"
#include "chanhom/twoscale.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#ifndef CHANHOM_SOURCE_DIR
#define CHANHOM_SOURCE_DIR "."
#endif

using namespace chanhom;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

StudyConfig b1() { return load_config(fs::path(CHANHOM_SOURCE_DIR) / "configs" / "b1.json"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Volume average of a fine micro field over the cells of a nested coarse grid.
std::vector<double> restrict_to(const RectGrid& coarse, const Field& fine) {
  const RectGrid& f = *fine.grid;
  std::vector<double> sum(coarse.active_count(), 0.0), vol(coarse.active_count(), 0.0);
  for (std::size_t a = 0; a < f.active_count(); ++a) {
    const Point2 c = f.center(a);
    const auto i = static_cast<std::size_t>(std::upper_bound(coarse.xs().begin(), coarse.xs().end(), c.x) -
                                            coarse.xs().begin() - 1);
    const auto j = static_cast<std::size_t>(std::upper_bound(coarse.ys().begin(), coarse.ys().end(), c.y) -
                                            coarse.ys().begin() - 1);
    const auto b = coarse.active(i, j);
    if (b < 0) throw std::runtime_error("grids are not nested");
    sum[static_cast<std::size_t>(b)] += f.volume(a) * fine.values[a];
    vol[static_cast<std::size_t>(b)] += f.volume(a);
  }
  for (std::size_t b = 0; b < sum.size(); ++b) {
    if (std::abs(vol[b] - coarse.volume(b)) > 1e-12 * coarse.volume(b)) throw std::runtime_error("grids are not nested");
    sum[b] /= vol[b];
  }
  return sum;
}

double leps_diff(const Field& a, const std::vector<double>& b) {
  std::vector<double> d(b.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.values[i] - b[i];
  return norm_Leps(Field(a.grid, std::move(d)));
}

Field final_micro(const StudyConfig& cfg, std::int64_t k, double dt) {
  StudyConfig c = cfg;
  c.k = c.m = k;
  const auto p = micro_problem_for(c, 0);
  const auto traj = run_micro(p, c.initial, c.final_time, dt, step_count(c.final_time, dt));
  return traj.snapshots.back();
}

}  // namespace

int main() {
  const StudyConfig base = b1();

  criterion(1, "operator identities", [&] {
    StudyConfig c = base;
    c.epsilon = {Rational(1, 4), Rational(1, 8)};
    c.random_fields = 100;
    double worst = 0.0;
    for (const auto& r : verify_operators(c)) worst = std::max(worst, r.worst.max());
    return Outcome{worst <= 1e-12, "max relative residual " + sci(worst) + " over 2 x 100 random pairs (<= 1e-12)"};
  });

  criterion(2, "conservation", [&] {
    StudyConfig c = base;
    c.kinetics = KineticsSpec::zero();
    c.epsilon = {Rational(1, 4), Rational(1, 8)};
    double micro_res = 0.0, macro_res = 0.0, const_dev = 0.0;
    const double dt = 1.0 / 128.0;
    InitialData wavy;
    wavy.plus = {1.0, 0.5, 0.3, 2, {}};
    wavy.minus = {-0.5, 0.2, 0.4, 1, {}};
    wavy.channel = {0.2, 0.7, 0.5, 3, {}};
    for (std::size_t i = 0; i < c.epsilon.size(); ++i) {
      const auto p = micro_problem_for(c, i);
      MicroState s = initial_micro_state(p, wavy);
      for (int n = 0; n < 100; ++n) {
        MicroState next = step_micro(p, s, dt);
        micro_res = std::max(micro_res, micro_mass_report(p, s, next).relative());
        s = std::move(next);
      }
      MicroState cs = initial_micro_state(p, {InitialExpr::constant(0.7), InitialExpr::constant(0.7),
                                              InitialExpr::constant(0.7)});
      for (int n = 0; n < 100; ++n) cs = step_micro(p, cs, dt);
      for (double v : cs.u.values) const_dev = std::max(const_dev, std::abs(v - 0.7));
    }
    const auto mp = macro_problem_for(c);
    MacroState s = initial_macro_state(mp, wavy);
    for (int n = 0; n < 100; ++n) {
      MacroState next = step_macro(mp, s, dt);
      macro_res = std::max(macro_res, macro_mass_report(mp, s, next).relative());
      s = std::move(next);
    }
    MacroState cs = initial_macro_state(
        mp, {InitialExpr::constant(0.7), InitialExpr::constant(0.7), InitialExpr::constant(0.7)});
    for (int n = 0; n < 100; ++n) cs = step_macro(mp, cs, dt);
    for (double v : cs.x) const_dev = std::max(const_dev, std::abs(v - 0.7));
    const bool ok = micro_res <= 1e-10 && macro_res <= 1e-10 && const_dev == 0.0;
    return Outcome{ok, "micro mass residual " + sci(micro_res) + ", macro " + sci(macro_res) +
                           " (<= 1e-10), constant-state deviation " + sci(const_dev)};
  });

  criterion(3, "discretization self-convergence", [&] {
    StudyConfig c = base;
    c.epsilon = {Rational(1, 4)};
    // Time: k = 4 at dt = 1/64, 1/128, 1/256.
    const Field t1 = final_micro(c, 4, 1.0 / 64), t2 = final_micro(c, 4, 1.0 / 128), t3 = final_micro(c, 4, 1.0 / 256);
    const double d1 = leps_diff(t1, t2.values), d2 = leps_diff(t2, t3.values);
    const double time_factor = d1 / d2;
    // Space: k = 4, 8 against k = 16 at dt = 1/128.
    const Field s4 = final_micro(c, 4, 1.0 / 128), s8 = final_micro(c, 8, 1.0 / 128), s16 = final_micro(c, 16, 1.0 / 128);
    const double e4 = leps_diff(s4, restrict_to(*s4.grid, s16)), e8 = leps_diff(s8, restrict_to(*s8.grid, s16));
    const double space_factor = e4 / e8;
    const bool ok = time_factor >= 1.8 && space_factor >= 3.0 && space_factor <= 5.0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "time factor %.3f (>= 1.8), space factor %.3f (in [3, 5]); diffs %s %s / %s %s",
                  time_factor, space_factor, sci(d1).c_str(), sci(d2).c_str(), sci(e4).c_str(), sci(e8).c_str());
    return Outcome{ok, buf};
  });

  const fs::path out_a = fs::temp_directory_path() / "chanhom_acceptance_a";
  const fs::path out_b = fs::temp_directory_path() / "chanhom_acceptance_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  StudyReport study;
  bool study_ok = false;
  std::string study_error;
  try {
    RunOptions o;
    o.out_dir = out_a;
    o.threads = 4;
    study = run_study(base, o);
    study_ok = true;
  } catch (const std::exception& e) {
    study_error = e.what();
  }

  criterion(4, "homogenization convergence", [&] {
    if (!study_ok) return Outcome{false, "study failed: " + study_error};
    const auto& r = study.rows;
    bool dec = true;
    for (std::size_t i = 1; i < r.size(); ++i)
      dec = dec && r[i].e_chan < r[i - 1].e_chan && r[i].e_bulk_plus < r[i - 1].e_bulk_plus &&
            r[i].e_bulk_minus < r[i - 1].e_bulk_minus;
    const double ratio = r.back().e_chan / r.front().e_chan;
    std::string d = "E_chan";
    for (const auto& x : r) d += " " + sci(x.e_chan);
    d += ", E_bulk+";
    for (const auto& x : r) d += " " + sci(x.e_bulk_plus);
    d += ", E_bulk-";
    for (const auto& x : r) d += " " + sci(x.e_bulk_minus);
    d += "; E_chan(1/16)/E_chan(1/4) = " + sci(ratio) + " (<= 0.6)";
    return Outcome{dec && ratio <= 0.6 && r.size() == 3, d};
  });

  criterion(5, "interface closure", [&] {
    const auto mp = macro_problem_for(base);
    const auto traj = run_macro(mp, base.initial, base.final_time, base.dt(), 1);
    // Recheck the final state independently of the run bookkeeping.
    double res = traj.max_balance_residual, spread = traj.max_trace_spread;
    for (const auto& s : traj.snapshots) {
      for (std::size_t j = 0; j < traj.layout.nodes; ++j) {
        const auto [rp, rm] = flux_balance_residual(mp, s, j);
        res = std::max({res, rp, rm});
        for (int side : {+1, -1}) {
          const double v = s.trace(traj.layout, side, j);
          for (double f : interface_face_values(mp, s, j, side)) spread = std::max(spread, std::abs(f - v));
        }
      }
    }
    return Outcome{res <= 1e-9 && spread == 0.0,
                   "max per-side balance residual " + sci(res) + " (<= 1e-9) over " + std::to_string(traj.steps) +
                       " steps x " + std::to_string(traj.layout.nodes) + " nodes, trace spread on S*+- " + sci(spread)};
  });

  criterion(6, "conduction oracle", [&] {
    const auto mp = macro_problem_for(base, DirichletOverride{true, 1.0, 0.0});
    const MacroState s = macro_steady_state(mp);
    const auto& l = mp.op->layout;
    double through = 0.0;
    for (std::size_t j = 0; j < l.nodes; ++j) through += l.dsigma * cell_flux(mp, s, j).first;
    const double w = to_double(base.cell->top_length());
    const double dyy = base.diffusion.channel.front()[1];
    const double H = base.height;
    const double oracle = 1.0 / (H / base.diffusion.d_plus + 2.0 / (dyy * w) + H / base.diffusion.d_minus);
    const double rel = std::abs(through - oracle) / oracle;
    return Outcome{rel <= 0.02, "through-flux " + sci(through) + " vs series network " + sci(oracle) +
                                    ", relative deviation " + sci(rel) + " (<= 2%)"};
  });

  criterion(7, "eps-uniform a-priori bound", [&] {
    if (!study_ok) return Outcome{false, "study failed: " + study_error};
    double lo = 1e300, hi = 0.0;
    std::string d = "||u||_{L2(H_eps)}";
    for (const auto& r : study.rows) {
      lo = std::min(lo, r.apriori_norm);
      hi = std::max(hi, r.apriori_norm);
      d += " " + sci(r.apriori_norm);
    }
    d += ", max/min " + sci(hi / lo) + " (< 2)";
    return Outcome{hi / lo < 2.0, d};
  });

  criterion(8, "shift diagnostic", [&] {
    if (!study_ok) return Outcome{false, "study failed: " + study_error};
    bool ok = true;
    std::string d = "LHS/RHS";
    for (const auto& r : study.rows) {
      if (r.eps > 1.0 / 8 + 1e-12) continue;
      ok = ok && std::isfinite(r.shift_ratio) && r.shift_ratio <= 10.0;
      d += " eps=" + sci(r.eps) + ": " + sci(r.shift_ratio);
    }
    return Outcome{ok, d + " (<= 10, l = 1, h = 1/4)"};
  });

  criterion(9, "determinism", [&] {
    if (!study_ok) return Outcome{false, "study failed: " + study_error};
    RunOptions o;
    o.out_dir = out_b;
    o.threads = 1;
    run_study(base, o);
    const std::string a = slurp(out_a / "report.csv"), b = slurp(out_b / "report.csv");
    bool fields_same = true;
    for (const auto& f : study.files)
      if (f.string().rfind("fields", 0) == 0) fields_same = fields_same && slurp(out_a / f) == slurp(out_b / f);
    const bool ok = !a.empty() && a == b && fields_same;
    return Outcome{ok, std::string("report.csv ") + (a == b ? "bit-identical" : "DIFFERS") +
                           " across reruns (4 threads vs 1), field dumps " + (fields_same ? "identical" : "DIFFER")};
  });

  fs::remove_all(out_a);
  fs::remove_all(out_b);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
