#include "chanhom/microsim.hpp"

#include "chanhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chanhom {

DiffusionSpec DiffusionSpec::uniform(double d_plus, double d_minus, double dxx, double dyy, std::size_t segments) {
  DiffusionSpec d;
  d.d_plus = d_plus;
  d.d_minus = d_minus;
  d.channel.assign(segments, {dxx, dyy});
  return d;
}

double DiffusionSpec::coercivity() const {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& t : channel) c = std::min({c, t[0], t[1]});
  return c;
}

void DiffusionSpec::validate(const CellGeometry& cell) const {
  if (!(d_plus > 0.0) || !std::isfinite(d_plus)) throw ConfigError("diffusivity.plus must be positive");
  if (!(d_minus > 0.0) || !std::isfinite(d_minus)) throw ConfigError("diffusivity.minus must be positive");
  if (channel.empty()) throw ConfigError("diffusivity.channel required");
  if (channel.size() != cell.profile().segments().size())
    throw ConfigError("diffusivity.channel needs one entry per profile segment (" +
                      std::to_string(cell.profile().segments().size()) + ")");
  for (const auto& t : channel)
    if (!(t[0] > 0.0) || !(t[1] > 0.0) || !std::isfinite(t[0]) || !std::isfinite(t[1]))
      throw ConfigError("diffusivity.channel entries must be positive (coercivity)");
}

std::array<double, 2> DiffusionSpec::channel_at(const CellGeometry& cell, Point2 y) const {
  return channel.at(cell.segment_at(y.y));
}

MicroOperator assemble_micro_operator(const MicroGeometry& geom, std::shared_ptr<const RectGrid> grid,
                                      const DiffusionSpec& diff) {
  diff.validate(geom.cell());
  const RectGrid& g = *grid;
  if (g.kind() != GridKind::Micro) throw AssemblyError("micro operator needs a micro grid");
  if (std::abs(g.eps - geom.eps()) > 1e-15) throw AlignmentError("grid was built for a different eps");
  const double eps = geom.eps();
  const std::size_t n = g.active_count();

  auto conductivity = [&](std::size_t a, int axis) {
    switch (g.region(a)) {
      case Region::BulkPlus: return diff.d_plus;
      case Region::BulkMinus: return diff.d_minus;
      case Region::Channel: return eps * diff.channel_at(geom.cell(), local_cell_y(g, a))[axis];
      case Region::Void: break;
    }
    throw AssemblyError("void cell in the active set");
  };

  MicroOperator op;
  op.grid = grid;
  op.eps = eps;
  op.k = g.refinement;
  op.mass.resize(n);
  for (std::size_t a = 0; a < n; ++a) op.mass[a] = g.region(a) == Region::Channel ? g.volume(a) / eps : g.volume(a);

  SparseBuilder b(n);
  op.transmissibility.assign(g.faces().size(), 0.0);
  for (std::size_t f = 0; f < g.faces().size(); ++f) {
    const Face& face = g.faces()[f];
    if (face.kind == FaceKind::Lateral) op.lateral_faces.push_back(static_cast<std::int32_t>(f));
    if (!face.internal()) continue;
    const auto a = static_cast<std::size_t>(face.a), c = static_cast<std::size_t>(face.b);
    const double t = face.length / (face.dist_a / conductivity(a, face.axis) + face.dist_b / conductivity(c, face.axis));
    op.transmissibility[f] = t;
    b.add_coupling(a, c, t);
  }
  op.stiffness = b.build(false);
  if (op.stiffness.asymmetry() != 0.0) throw AssemblyError("micro stiffness is not symmetric");
  return op;
}

double micro_stability_limit(const KineticsSpec& kin, const CellGeometry& cell, std::int64_t k) {
  const double ratio = to_double(cell.lateral_length()) / to_double(cell.area());
  const double L = std::max({kin.f_plus.lipschitz(), kin.f_minus.lipschitz(), kin.g.lipschitz(),
                             kin.h.lipschitz() * static_cast<double>(k) * ratio});
  return L > 0.0 ? 0.5 / L : std::numeric_limits<double>::infinity();
}

MicroProblem make_micro_problem(std::shared_ptr<const MicroGeometry> geom, std::int64_t k, const DiffusionSpec& diff,
                                const KineticsSpec& kin, const GridOptions& opts) {
  kin.validate();
  auto grid = build_micro_grid(*geom, k, opts);
  MicroProblem p;
  p.op = std::make_shared<const MicroOperator>(assemble_micro_operator(*geom, grid, diff));
  p.geom = std::move(geom);
  p.kinetics = kin;
  p.solver.tol = 1e-12;
  return p;
}

MicroState initial_micro_state(const MicroProblem& p, const InitialData& init) {
  const RectGrid& g = *p.op->grid;
  std::vector<double> v(g.active_count());
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    const Point2 x = g.center(a);
    switch (g.region(a)) {
      case Region::BulkPlus: v[a] = init.bulk(+1, x); break;
      case Region::BulkMinus: v[a] = init.bulk(-1, x); break;
      case Region::Channel: v[a] = init.cell(x.x, local_cell_y(g, a)); break;
      case Region::Void: break;
    }
  }
  MicroState s;
  s.u = Field(p.op->grid, std::move(v), 0.0);
  return s;
}

std::vector<double> micro_sources(const MicroProblem& p, const Field& u, double t) {
  const RectGrid& g = *p.op->grid;
  const Field rates = sample_micro_kinetics(p.kinetics, *p.geom, u, t);
  std::vector<double> r(g.active_count());
  for (std::size_t a = 0; a < g.active_count(); ++a) r[a] = p.op->mass[a] * rates.values[a];
  const auto h = sample_boundary_kinetics(p.kinetics, *p.geom, u, t);
  for (auto f : p.op->lateral_faces) {
    const Face& face = g.faces()[static_cast<std::size_t>(f)];
    r[static_cast<std::size_t>(face.a)] -= h[static_cast<std::size_t>(f)] * face.length;
  }
  return r;
}

MicroState step_micro(const MicroProblem& p, const MicroState& s, double dt) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  const double limit = micro_stability_limit(p.kinetics, p.geom->cell(), p.op->k);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time step " << dt << " exceeds the stability limit " << limit;
    throw StabilityError(os.str());
  }
  std::shared_ptr<const SparseMatrix> system = s.system;
  if (!system || s.dt != dt) {
    std::vector<double> d(p.op->mass.size());
    for (std::size_t a = 0; a < d.size(); ++a) d[a] = p.op->mass[a] / dt;
    auto m = p.op->stiffness.plus_diagonal(d);
    m.mark_symmetric();
    system = std::make_shared<const SparseMatrix>(std::move(m));
  }

  // Increment form (M/dt + A) du = R(u0) - A u0, so constants stay bit-exact.
  auto rhs = micro_sources(p, s.u, s.t);
  const auto au = p.op->stiffness.multiply_flux(s.u.values);
  for (std::size_t a = 0; a < rhs.size(); ++a) rhs[a] -= au[a];
  auto x = solve_spd(*system, rhs, p.solver);
  for (std::size_t a = 0; a < x.size(); ++a) x[a] += s.u.values[a];

  MicroState out;
  out.t = s.t + dt;
  out.u = Field(p.op->grid, std::move(x), out.t);
  out.dt = dt;
  out.system = std::move(system);
  return out;
}

double micro_mass(const MicroProblem& p, const Field& u) {
  double m = 0.0;
  for (std::size_t a = 0; a < u.values.size(); ++a) m += p.op->mass[a] * u.values[a];
  return m;
}

double MassBalance::relative() const {
  const double s = std::max({scale, std::abs(mass_before), std::abs(mass_after), 1e-300});
  return residual / s;
}

MassBalance micro_mass_report(const MicroProblem& p, const MicroState& before, const MicroState& after) {
  MassBalance mb;
  mb.mass_before = micro_mass(p, before.u);
  mb.mass_after = micro_mass(p, after.u);
  const auto r = micro_sources(p, before.u, before.t);
  double src = 0.0;
  for (double v : r) src += v;
  mb.source = (after.t - before.t) * src;
  mb.residual = std::abs(mb.mass_after - mb.mass_before - mb.source);
  for (const Field* f : {&before.u, &after.u}) {
    double m = 0.0;
    for (std::size_t a = 0; a < f->values.size(); ++a) m += p.op->mass[a] * std::abs(f->values[a]);
    mb.scale = std::max(mb.scale, m);
  }
  return mb;
}

std::size_t step_count(double T, double dt) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("final time must be non-negative");
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  const double n = std::round(T / dt);
  if (std::abs(n * dt - T) > 1e-9 * std::max(T, dt))
    throw ValidationError("final time is not an integer multiple of the time step");
  return static_cast<std::size_t>(n);
}

MicroTrajectory run_micro(const MicroProblem& p, const InitialData& init, double T, double dt,
                          std::size_t snapshot_stride) {
  const std::size_t n = step_count(T, dt);
  if (snapshot_stride == 0) snapshot_stride = 1;
  MicroTrajectory traj;
  traj.grid = p.op->grid;
  traj.eps = p.op->eps;
  traj.dt = dt;
  traj.steps = n;

  MicroState s = initial_micro_state(p, init);
  traj.snapshots.push_back(s.u);
  for (std::size_t i = 1; i <= n; ++i) {
    MicroState next = step_micro(p, s, dt);
    next.t = static_cast<double>(i) * dt;
    next.u.time = next.t;
    traj.max_mass_residual = std::max(traj.max_mass_residual, micro_mass_report(p, s, next).relative());
    s = std::move(next);
    if (i % snapshot_stride == 0 || i == n) traj.snapshots.push_back(s.u);
  }
  return traj;
}

}  // namespace chanhom
