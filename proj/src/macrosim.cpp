#include "chanhom/macrosim.hpp"

#include "chanhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chanhom {

InterfaceLayout build_interface_layout(std::shared_ptr<const CellGeometry> cell, double height,
                                       std::int64_t sigma_nodes, std::int64_t m, std::int64_t bulk_sub,
                                       const GridOptions& opts) {
  if (!cell) throw GeometryError("missing reference cell");
  if (sigma_nodes < 1) throw ValidationError("need at least one interface node");
  if (!(height > 0.0)) throw GeometryError("bulk height must be positive");
  InterfaceLayout l;
  l.cell_grid = build_cell_grid(*cell, m);
  l.bulk = build_macro_bulk_grid(height, sigma_nodes, bulk_sub, opts);
  l.cell = std::move(cell);
  l.nodes = static_cast<std::size_t>(sigma_nodes);
  l.dsigma = 1.0 / static_cast<double>(sigma_nodes);
  return l;
}

MacroOperator assemble_macro(const InterfaceLayout& layout, const DiffusionSpec& diff,
                             const DirichletOverride& dirichlet) {
  diff.validate(*layout.cell);
  const RectGrid& bg = *layout.bulk;
  const RectGrid& cg = *layout.cell_grid;
  if (bg.nx() != layout.nodes) throw AlignmentError("bulk grid spacing at the interface does not match dsigma");
  const std::size_t n = layout.unknowns();
  const double ds = layout.dsigma;

  MacroOperator op;
  op.layout = layout;
  op.d_plus = diff.d_plus;
  op.d_minus = diff.d_minus;
  op.dirichlet = dirichlet.enabled;
  op.mass.assign(n, 0.0);
  op.dirichlet_rhs.assign(n, 0.0);
  op.bulk_links.resize(layout.nodes);
  op.cell_links.resize(layout.nodes);

  SparseBuilder b(n);
  auto bulk_d = [&](std::size_t a) { return bg.region(a) == Region::BulkPlus ? diff.d_plus : diff.d_minus; };

  for (std::size_t a = 0; a < bg.active_count(); ++a) op.mass[a] = bg.volume(a);
  for (const Face& f : bg.faces()) {
    const auto a = static_cast<std::size_t>(f.a);
    if (f.internal()) {
      const auto c = static_cast<std::size_t>(f.b);
      b.add_coupling(a, c, f.length / (f.dist_a / bulk_d(a) + f.dist_b / bulk_d(c)));
    } else if (f.kind == FaceKind::Sigma) {
      const std::size_t j = bg.ij(a)[0];
      const double t = f.length * bulk_d(a) / f.dist_a;
      const std::size_t v = layout.trace_index(f.side, j);
      b.add_coupling(a, v, t);
      op.bulk_links[j][f.side > 0 ? 0 : 1] = TraceLink{a, t, f.length, f.dist_a};
    } else if (dirichlet.enabled && (f.kind == FaceKind::Top || f.kind == FaceKind::Bottom)) {
      const double t = f.length * bulk_d(a) / f.dist_a;
      b.add(a, a, t);
      op.dirichlet_rhs[a] += t * (f.kind == FaceKind::Top ? dirichlet.top : dirichlet.bottom);
    }
  }

  auto cell_d = [&](std::size_t c, int axis) { return diff.channel_at(*layout.cell, local_cell_y(cg, c))[axis]; };
  for (std::size_t f = 0; f < cg.faces().size(); ++f)
    if (cg.faces()[f].kind == FaceKind::Lateral) op.lateral_faces.push_back(static_cast<std::int32_t>(f));

  for (std::size_t j = 0; j < layout.nodes; ++j) {
    const std::size_t off = layout.cell_offset(j);
    for (std::size_t c = 0; c < cg.active_count(); ++c) op.mass[off + c] = ds * cg.volume(c);
    for (const Face& f : cg.faces()) {
      const auto a = static_cast<std::size_t>(f.a);
      if (f.internal()) {
        const auto c = static_cast<std::size_t>(f.b);
        const double t = ds * f.length / (f.dist_a / cell_d(a, f.axis) + f.dist_b / cell_d(c, f.axis));
        b.add_coupling(off + a, off + c, t);
      } else if (f.kind == FaceKind::Interface) {
        const double t = ds * cell_d(a, 1) * f.length / f.dist_a;
        b.add_coupling(off + a, layout.trace_index(f.side, j), t);
        op.cell_links[j][f.side > 0 ? 0 : 1].push_back(TraceLink{off + a, t, f.length, f.dist_a});
      }
    }
  }
  op.stiffness = b.build(false);
  if (op.stiffness.asymmetry() != 0.0) throw AssemblyError("macro stiffness is not symmetric");
  for (std::size_t j = 0; j < layout.nodes; ++j)
    for (int s = 0; s < 2; ++s)
      if (op.cell_links[j][s].empty() || op.bulk_links[j][s].t <= 0.0)
        throw AssemblyError("interface node " + std::to_string(j) + " is not coupled on both sides");
  return op;
}

MacroProblem make_macro_problem(const InterfaceLayout& layout, const DiffusionSpec& diff, const KineticsSpec& kin,
                                const DirichletOverride& dirichlet) {
  kin.validate();
  MacroProblem p;
  p.op = std::make_shared<const MacroOperator>(assemble_macro(layout, diff, dirichlet));
  p.kinetics = kin;
  p.solver.tol = 1e-13;
  p.refinement = layout.cell_grid->refinement;
  return p;
}

void update_traces(const MacroOperator& op, std::vector<double>& x) {
  for (std::size_t j = 0; j < op.layout.nodes; ++j) {
    for (int s = 0; s < 2; ++s) {
      const TraceLink& bl = op.bulk_links[j][s];
      double num = bl.t * x[bl.unknown], den = bl.t;
      for (const TraceLink& cl : op.cell_links[j][s]) {
        num += cl.t * x[cl.unknown];
        den += cl.t;
      }
      x[op.layout.trace_index(s == 0 ? +1 : -1, j)] = num / den;
    }
  }
}

MacroState initial_macro_state(const MacroProblem& p, const InitialData& init) {
  const InterfaceLayout& l = p.op->layout;
  MacroState s;
  s.x.assign(l.unknowns(), 0.0);
  const RectGrid& bg = *l.bulk;
  for (std::size_t a = 0; a < bg.active_count(); ++a)
    s.x[a] = init.bulk(bg.region(a) == Region::BulkPlus ? +1 : -1, bg.center(a));
  const RectGrid& cg = *l.cell_grid;
  for (std::size_t j = 0; j < l.nodes; ++j)
    for (std::size_t c = 0; c < cg.active_count(); ++c) s.x[l.cell_offset(j) + c] = init.cell(l.node(j), local_cell_y(cg, c));
  update_traces(*p.op, s.x);
  return s;
}

std::vector<double> macro_sources(const MacroProblem& p, const MacroState& s) {
  const InterfaceLayout& l = p.op->layout;
  const RectGrid& bg = *l.bulk;
  const RectGrid& cg = *l.cell_grid;
  std::vector<double> r(l.unknowns(), 0.0);
  for (std::size_t a = 0; a < bg.active_count(); ++a) {
    const int side = bg.region(a) == Region::BulkPlus ? +1 : -1;
    r[a] = bg.volume(a) * eval_f(p.kinetics, side, s.t, bg.center(a), s.x[a]);
  }
  for (std::size_t j = 0; j < l.nodes; ++j) {
    const std::size_t off = l.cell_offset(j);
    for (std::size_t c = 0; c < cg.active_count(); ++c)
      r[off + c] = p.op->mass[off + c] * eval_g(p.kinetics, *l.cell, s.t, local_cell_y(cg, c), s.x[off + c]);
    for (auto fi : p.op->lateral_faces) {
      const Face& f = cg.faces()[static_cast<std::size_t>(fi)];
      const std::size_t c = off + static_cast<std::size_t>(f.a);
      r[c] -= l.dsigma * f.length *
              eval_h(p.kinetics, *l.cell, s.t, local_face_y(cg, static_cast<std::size_t>(fi)), s.x[c]);
    }
  }
  return r;
}

MacroState step_macro(const MacroProblem& p, const MacroState& s, double dt) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  const double limit = micro_stability_limit(p.kinetics, *p.op->layout.cell, p.refinement);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time step " << dt << " exceeds the stability limit " << limit;
    throw StabilityError(os.str());
  }
  std::shared_ptr<const SparseMatrix> system = s.system;
  if (!system || s.dt != dt) {
    std::vector<double> d(p.op->mass.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.op->mass[i] / dt;
    auto m = p.op->stiffness.plus_diagonal(d);
    m.mark_symmetric();
    system = std::make_shared<const SparseMatrix>(std::move(m));
  }
  auto rhs = macro_sources(p, s);
  const auto ax = p.op->stiffness.multiply_flux(s.x);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += p.op->dirichlet_rhs[i] - ax[i];

  MacroState out;
  out.x = solve_spd(*system, rhs, p.solver);
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] += s.x[i];
  out.t = s.t + dt;
  out.dt = dt;
  out.system = std::move(system);
  return out;
}

double macro_mass(const MacroProblem& p, const MacroState& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) m += p.op->mass[i] * s.x[i];
  return m;
}

MassBalance macro_mass_report(const MacroProblem& p, const MacroState& before, const MacroState& after) {
  MassBalance mb;
  mb.mass_before = macro_mass(p, before);
  mb.mass_after = macro_mass(p, after);
  const auto r = macro_sources(p, before);
  double src = 0.0;
  for (double v : r) src += v;
  mb.source = (after.t - before.t) * src;
  mb.residual = std::abs(mb.mass_after - mb.mass_before - mb.source);
  for (const MacroState* st : {&before, &after}) {
    double m = 0.0;
    for (std::size_t i = 0; i < st->x.size(); ++i) m += p.op->mass[i] * std::abs(st->x[i]);
    mb.scale = std::max(mb.scale, m);
  }
  return mb;
}

std::pair<double, double> cell_flux(const MacroProblem& p, const MacroState& s, std::size_t j) {
  const InterfaceLayout& l = p.op->layout;
  double F[2] = {0.0, 0.0};
  for (int side = 0; side < 2; ++side) {
    const double v = s.x[l.trace_index(side == 0 ? +1 : -1, j)];
    // t already carries dsigma and D^M_yy len / dist.
    for (const TraceLink& cl : p.op->cell_links[j][side]) F[side] += cl.t / l.dsigma * (v - s.x[cl.unknown]);
  }
  return {F[0], F[1]};
}

std::pair<double, double> flux_balance_residual(const MacroProblem& p, const MacroState& s, std::size_t j) {
  const InterfaceLayout& l = p.op->layout;
  const auto [fp, fm] = cell_flux(p, s, j);
  double res[2];
  const double F[2] = {fp, fm};
  for (int side = 0; side < 2; ++side) {
    const TraceLink& bl = p.op->bulk_links[j][side];
    const double D = side == 0 ? p.op->d_plus : p.op->d_minus;
    const double v = s.x[l.trace_index(side == 0 ? +1 : -1, j)];
    res[side] = std::abs(D * (s.x[bl.unknown] - v) / bl.dist - F[side]);
  }
  return {res[0], res[1]};
}

std::vector<double> interface_face_values(const MacroProblem& p, const MacroState& s, std::size_t j, int side) {
  const InterfaceLayout& l = p.op->layout;
  std::vector<double> out;
  // Every S*+- face of cell problem j is coupled to the same trace unknown.
  for (const TraceLink& cl : p.op->cell_links[j][side > 0 ? 0 : 1]) {
    (void)cl;
    out.push_back(s.x[l.trace_index(side, j)]);
  }
  return out;
}

MacroState macro_steady_state(const MacroProblem& p) {
  if (!p.op->dirichlet) throw ValidationError("steady state needs the Dirichlet override");
  SparseMatrix A = p.op->stiffness;
  A.mark_symmetric();
  MacroState s;
  SolveOptions opts = p.solver;
  opts.maxit = 50 * A.dim();
  s.x = solve_spd(A, p.op->dirichlet_rhs, opts);
  return s;
}

MacroTrajectory run_macro(const MacroProblem& p, const InitialData& init, double T, double dt,
                          std::size_t snapshot_stride) {
  const std::size_t n = step_count(T, dt);
  if (snapshot_stride == 0) snapshot_stride = 1;
  MacroTrajectory traj;
  traj.layout = p.op->layout;
  traj.dt = dt;
  traj.steps = n;
  const InterfaceLayout& l = p.op->layout;

  auto strip = [](MacroState st) {
    st.system.reset();
    return st;
  };
  auto check = [&](const MacroState& st) {
    for (std::size_t j = 0; j < l.nodes; ++j) {
      const auto [rp, rm] = flux_balance_residual(p, st, j);
      traj.max_balance_residual = std::max({traj.max_balance_residual, rp, rm});
      for (int side : {+1, -1}) {
        const auto vals = interface_face_values(p, st, j, side);
        const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
        traj.max_trace_spread = std::max(traj.max_trace_spread, *hi - *lo);
      }
    }
  };

  MacroState s = initial_macro_state(p, init);
  traj.snapshots.push_back(strip(s));
  for (std::size_t i = 1; i <= n; ++i) {
    MacroState next = step_macro(p, s, dt);
    next.t = static_cast<double>(i) * dt;
    check(next);
    traj.max_mass_residual = std::max(traj.max_mass_residual, macro_mass_report(p, s, next).relative());
    s = std::move(next);
    if (i % snapshot_stride == 0 || i == n) traj.snapshots.push_back(strip(s));
  }
  return traj;
}

}  // namespace chanhom
