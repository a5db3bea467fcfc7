#pragma once

#include "chanhom/grid.hpp"
#include "chanhom/macrosim.hpp"
#include "chanhom/microsim.hpp"

#include <memory>
#include <span>
#include <vector>

namespace chanhom {

/// Index correspondence between the channel cells of a micro grid with layer
/// refinement k and the cell grid with refinement m = k. Unfolding is a pure
/// permutation under this map.
struct UnfoldingMap {
  std::shared_ptr<const RectGrid> micro;
  std::shared_ptr<const RectGrid> cell;
  std::size_t columns = 0;
  double eps = 0.0;
  std::vector<std::int32_t> micro_of;       // [col * nc + c] -> micro active index
  std::vector<std::int32_t> lateral;        // cell grid faces on N, in face order
  std::vector<std::int32_t> micro_lateral;  // [col * nl + q] -> micro face on N_eps

  std::size_t cell_count() const { return cell->active_count(); }
  std::size_t lateral_count() const { return lateral.size(); }
};

/// Throws AlignmentError when the refinements differ.
UnfoldingMap build_unfolding_map(std::shared_ptr<const RectGrid> micro, std::shared_ptr<const RectGrid> cell);

/// Values on Sigma x Z*: `nodes` uniform pieces of Sigma times the cell grid.
struct TwoScaleField {
  std::shared_ptr<const RectGrid> cell;
  std::size_t nodes = 0;
  std::vector<double> values;  // [j * nc + c]
  double time = 0.0;
  double eps = 0.0;

  double at(std::size_t j, std::size_t c) const { return values[j * cell->active_count() + c]; }
};

TwoScaleField unfold(const UnfoldingMap& map, const Field& v);
/// Values on N_eps faces (indexed by micro face) to Sigma columns x N faces.
std::vector<double> unfold_boundary(const UnfoldingMap& map, std::span<const double> face_values);
/// Adjoint of unfold: column average over the nodes of each eps-cell, then
/// the inverse remap. Bulk cells are zero.
Field average(const UnfoldingMap& map, const TwoScaleField& phi);

/// (a, b) on Sigma x Z*: sum_j (1/nodes) sum_c vol_y a b.
double inner_product_two_scale(const TwoScaleField& a, const TwoScaleField& b);
/// ||.||^2 on Sigma x N of unfolded boundary values.
double boundary_norm_sq_two_scale(const UnfoldingMap& map, std::span<const double> unfolded);
/// Plain L2 quantities on the micro grid.
double channel_l2_sq(const Field& v);
double channel_inner(const Field& a, const Field& b);
double lateral_l2_sq(const RectGrid& grid, std::span<const double> face_values);
/// Traces of a micro field on N_eps faces (adjacent cell value), indexed by face.
std::vector<double> lateral_trace(const Field& v);

struct IdentityResiduals {
  double isometry = 0.0;
  double boundary_norm = 0.0;
  double gradient = 0.0;
  double adjoint = 0.0;
  double round_trip = 0.0;
  double commutation = 0.0;
  double norm_bound = 0.0;  // max(0, ||U phi|| - sqrt(eps) ||phi||) relative
  double max() const;
};

/// Relative residuals of the exact unfolding identities for one pair (v, phi).
IdentityResiduals check_unfolding_identities(const UnfoldingMap& map, const Field& v, const TwoScaleField& phi);

struct TwoScaleErrors {
  double e_chan = 0.0;
  double e_bulk_plus = 0.0;
  double e_bulk_minus = 0.0;
  double e_n = 0.0;
};

/// Unfolding-based errors between a micro and a macro trajectory with equal
/// snapshot times, integrated in time by the trapezoid rule.
TwoScaleErrors ts_error(const MicroTrajectory& micro, const MacroTrajectory& macro, const UnfoldingMap& map);

/// Macro cell fields of one snapshot as a two-scale field.
TwoScaleField macro_cell_field(const InterfaceLayout& layout, const MacroState& s);

/// ||u||_{L2((0,T), H_eps)} by the trapezoid rule over snapshots.
double apriori_norm(const MicroTrajectory& traj);

/// Trapezoid rule for sqrt(int_0^T q(t) dt) given q at the snapshot times.
double trapezoid_sqrt(std::span<const double> times, std::span<const double> q);

struct ShiftDiagnostic {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double chan_sup = 0.0;
  double chan_grad = 0.0;
  double init_shift = 0.0;
  double bulk_shift = 0.0;
};

/// Shift estimate with delta u = u(x + eps l e_1) - u(x). The left side lives
/// on the channel columns inside (h, 1 - h), the right side on the margin h/2.
ShiftDiagnostic shift_diagnostic(const MicroTrajectory& traj, std::int64_t l, double h);

struct TraceCalibration {
  double theta = 1.0;
  double constant = 0.0;
  std::size_t basis = 0;
  std::size_t rank = 0;
};

/// C(theta)^2 = max over the span of low-frequency cosines on Z* of
/// (||v||_N^2 - theta^2 ||grad v||^2) / ||v||^2 (discrete forms on the cell grid).
TraceCalibration calibrate_trace_constant(const RectGrid& cell_grid, double theta, std::size_t basis = 20);

/// Values of the calibration basis function p at the cell grid centers.
std::vector<double> trace_basis_function(const RectGrid& cell_grid, std::size_t p);

struct TraceInequality {
  double lhs = 0.0;
  double rhs_mass = 0.0;
  double rhs_grad = 0.0;
  double rhs() const { return rhs_mass + rhs_grad; }
};

TraceInequality trace_inequality_diagnostic(const Field& v, double theta, const TraceCalibration& cal);

}  // namespace chanhom
