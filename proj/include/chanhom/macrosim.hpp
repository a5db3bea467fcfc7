#pragma once

#include "chanhom/geometry.hpp"
#include "chanhom/grid.hpp"
#include "chanhom/kinetics.hpp"
#include "chanhom/linsolve.hpp"
#include "chanhom/microsim.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace chanhom {

/// Interface nodes x_bar_j (midpoints of a uniform partition of Sigma) and the
/// grids of the limit problem. Unknowns are ordered
///   [bulk cells][cell problem 0] ... [cell problem n-1][v+_0 .. v+_{n-1}][v-_0 .. v-_{n-1}].
struct InterfaceLayout {
  std::shared_ptr<const CellGeometry> cell;
  std::shared_ptr<const RectGrid> bulk;       // Omega+ and Omega-
  std::shared_ptr<const RectGrid> cell_grid;  // Z*
  std::size_t nodes = 0;
  double dsigma = 0.0;

  std::size_t bulk_count() const { return bulk->active_count(); }
  std::size_t cell_count() const { return cell_grid->active_count(); }
  std::size_t cell_offset(std::size_t j) const { return bulk_count() + j * cell_count(); }
  std::size_t trace_index(int side, std::size_t j) const {
    return bulk_count() + nodes * cell_count() + (side > 0 ? 0 : nodes) + j;
  }
  std::size_t unknowns() const { return bulk_count() + nodes * cell_count() + 2 * nodes; }
  double node(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dsigma; }
};

/// `bulk_sub` subdivides the graded coarse bulk partition whose first
/// interval is dsigma * bulk_sub (so doubling it nests the grids).
InterfaceLayout build_interface_layout(std::shared_ptr<const CellGeometry> cell, double height,
                                       std::int64_t sigma_nodes, std::int64_t m, std::int64_t bulk_sub = 1,
                                       const GridOptions& opts = {});

/// Harness-level boundary override used by the conduction check only.
struct DirichletOverride {
  bool enabled = false;
  double top = 0.0;
  double bottom = 0.0;
};

/// One coupling between a trace unknown and a bulk or cell unknown.
struct TraceLink {
  std::size_t unknown = 0;
  double t = 0.0;     // assembled transmissibility (includes dsigma)
  double len = 0.0;   // face length (x for bulk links, y for cell links)
  double dist = 0.0;  // distance from the cell center to the face
};

struct MacroOperator {
  InterfaceLayout layout;
  SparseMatrix stiffness;
  std::vector<double> mass;
  std::vector<double> dirichlet_rhs;  // T_D * value on bulk rows
  /// Per node j: bulk link and S*+- cell links of v+_j (index 0) and v-_j (index 1).
  std::vector<std::array<TraceLink, 2>> bulk_links;
  std::vector<std::array<std::vector<TraceLink>, 2>> cell_links;
  std::vector<std::int32_t> lateral_faces;  // cell grid faces on N
  double d_plus = 0.0, d_minus = 0.0;
  bool dirichlet = false;
};

MacroOperator assemble_macro(const InterfaceLayout& layout, const DiffusionSpec& diff,
                             const DirichletOverride& dirichlet = {});

struct MacroProblem {
  std::shared_ptr<const MacroOperator> op;
  KineticsSpec kinetics;
  SolveOptions solver;
  std::int64_t refinement = 0;  // m, for the stability bound
};

MacroProblem make_macro_problem(const InterfaceLayout& layout, const DiffusionSpec& diff, const KineticsSpec& kin,
                                const DirichletOverride& dirichlet = {});

struct MacroState {
  double t = 0.0;
  std::vector<double> x;  // all unknowns in layout order
  double dt = 0.0;
  std::shared_ptr<const SparseMatrix> system;

  std::span<const double> bulk(const InterfaceLayout& l) const { return {x.data(), l.bulk_count()}; }
  std::span<const double> cell(const InterfaceLayout& l, std::size_t j) const {
    return {x.data() + l.cell_offset(j), l.cell_count()};
  }
  double trace(const InterfaceLayout& l, int side, std::size_t j) const { return x[l.trace_index(side, j)]; }
};

/// Traces from the local balance of their rows, given bulk and cell values.
void update_traces(const MacroOperator& op, std::vector<double>& x);

MacroState initial_macro_state(const MacroProblem& p, const InitialData& init);
std::vector<double> macro_sources(const MacroProblem& p, const MacroState& s);
MacroState step_macro(const MacroProblem& p, const MacroState& s, double dt);

/// sum of bulk vol u + sum_j dsigma sum vol_y u.
double macro_mass(const MacroProblem& p, const MacroState& s);
MassBalance macro_mass_report(const MacroProblem& p, const MacroState& before, const MacroState& after);

/// (F+_j, F-_j): flux into cell problem j through S*+ and S*-,
/// sum len D^M_yy (v -+ u_c) / dist over the S*+- faces.
std::pair<double, double> cell_flux(const MacroProblem& p, const MacroState& s, std::size_t j);

/// Per-side balance residuals |D+ (u_b - v+)/dist - F+| and |D- (u_b - v-)/dist - F-|.
std::pair<double, double> flux_balance_residual(const MacroProblem& p, const MacroState& s, std::size_t j);

/// Values the cell problem j sees on each of its S*+ (side > 0) or S*- faces.
std::vector<double> interface_face_values(const MacroProblem& p, const MacroState& s, std::size_t j, int side);

/// Steady state of the pure-diffusion problem (zero kinetics); needs the
/// Dirichlet override so that the operator is definite.
MacroState macro_steady_state(const MacroProblem& p);

struct MacroTrajectory {
  InterfaceLayout layout;
  double dt = 0.0;
  std::vector<MacroState> snapshots;  // systems dropped
  double max_balance_residual = 0.0;
  double max_mass_residual = 0.0;
  double max_trace_spread = 0.0;  // structural check on S*+-
  std::size_t steps = 0;
};

MacroTrajectory run_macro(const MacroProblem& p, const InitialData& init, double T, double dt,
                          std::size_t snapshot_stride);

}  // namespace chanhom
