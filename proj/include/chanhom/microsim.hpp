#pragma once

#include "chanhom/geometry.hpp"
#include "chanhom/grid.hpp"
#include "chanhom/kinetics.hpp"
#include "chanhom/linsolve.hpp"

#include <array>
#include <memory>
#include <vector>

namespace chanhom {

/// D+ and D- in the bulk, diagonal D^M = diag(D_xx, D_yy) per profile segment.
struct DiffusionSpec {
  double d_plus = 1.0;
  double d_minus = 1.0;
  std::vector<std::array<double, 2>> channel;

  static DiffusionSpec uniform(double d_plus, double d_minus, double dxx, double dyy, std::size_t segments = 1);

  /// Smallest diagonal entry of D^M.
  double coercivity() const;
  /// Throws ConfigError unless all entries are positive and one channel
  /// tensor per profile segment is given.
  void validate(const CellGeometry& cell) const;
  /// D^M at a point of Z* (segment lookup by y_n).
  std::array<double, 2> channel_at(const CellGeometry& cell, Point2 y) const;
};

/// Stiffness, L_eps accumulation weights and per-cell conductivities of the
/// micro problem.
struct MicroOperator {
  std::shared_ptr<const RectGrid> grid;
  double eps = 0.0;
  SparseMatrix stiffness;
  std::vector<double> mass;             // vol in the bulk, vol/eps in the channel
  std::vector<double> transmissibility;  // per face, 0 on boundary faces
  std::vector<std::int32_t> lateral_faces;
  std::int64_t k = 0;
};

/// TPFA face transmissibility len / (d_a / K_a + d_b / K_b), K = D+- in the
/// bulk and eps D^M_axis in the channel.
MicroOperator assemble_micro_operator(const MicroGeometry& geom, std::shared_ptr<const RectGrid> grid,
                                      const DiffusionSpec& diff);

/// Largest stable step 0.5 / max(L_f+, L_f-, L_g, L_h k |N| / |Z*|).
double micro_stability_limit(const KineticsSpec& kin, const CellGeometry& cell, std::int64_t k);

struct MicroProblem {
  std::shared_ptr<const MicroGeometry> geom;
  std::shared_ptr<const MicroOperator> op;
  KineticsSpec kinetics;
  SolveOptions solver;
};

MicroProblem make_micro_problem(std::shared_ptr<const MicroGeometry> geom, std::int64_t k, const DiffusionSpec& diff,
                                const KineticsSpec& kin, const GridOptions& opts = {});

struct MicroState {
  double t = 0.0;
  Field u;
  double dt = 0.0;
  std::shared_ptr<const SparseMatrix> system;  // M/dt + A for the cached dt
};

/// Initial state: channel cells take u_i^M(x_bar_center, x_center / eps),
/// bulk cells u_i+-(x_center).
MicroState initial_micro_state(const MicroProblem& p, const InitialData& init);

/// Explicit right-hand side R(u): vol f in the bulk, (vol/eps) g in the
/// channel, minus h len on lateral faces.
std::vector<double> micro_sources(const MicroProblem& p, const Field& u, double t);

/// One IMEX step (M/dt + A) u1 = M u0 / dt + R(u0). Throws StabilityError when
/// dt exceeds the stability limit.
MicroState step_micro(const MicroProblem& p, const MicroState& s, double dt);

/// Weighted mass sum(M u).
double micro_mass(const MicroProblem& p, const Field& u);

struct MassBalance {
  double mass_before = 0.0;
  double mass_after = 0.0;
  double source = 0.0;  // dt * sum of R(u_before)
  double residual = 0.0;
  double scale = 0.0;  // weighted mass of |u|, larger of the two states
  double relative() const;
};

/// Discrete weighted-mass identity of one step.
MassBalance micro_mass_report(const MicroProblem& p, const MicroState& before, const MicroState& after);

struct MicroTrajectory {
  std::shared_ptr<const RectGrid> grid;
  double eps = 0.0;
  double dt = 0.0;
  std::vector<Field> snapshots;
  double max_mass_residual = 0.0;  // relative, over all steps
  std::size_t steps = 0;
};

/// Number of steps T/dt; throws ValidationError if it is not an integer.
std::size_t step_count(double T, double dt);

MicroTrajectory run_micro(const MicroProblem& p, const InitialData& init, double T, double dt,
                          std::size_t snapshot_stride);

}  // namespace chanhom
