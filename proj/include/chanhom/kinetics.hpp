#pragma once

#include "chanhom/geometry.hpp"
#include "chanhom/grid.hpp"

#include <functional>
#include <string>
#include <vector>

namespace chanhom {

enum class RateKind { Zero, LinearDecay, LogisticClamped, Exchange, Tabulated, Custom };

const char* rate_kind_name(RateKind k);
RateKind parse_rate_kind(const std::string& name);

/// Signature of user supplied rates: (t, position, u). The position is x for
/// bulk rates, y in Z* for g and a point of N for h.
using RateFunction = std::function<double(double, Point2, double)>;

/// One scalar rate of the family
///   zero:              0
///   linear_decay:      -lambda u
///   logistic_clamped:  r u (1 - u/u_cap) on [-M, M], linear continuation outside
///   exchange:          kappa (u - u_ext)
///   tabulated:         piecewise linear through (table_u, table_v), constant outside
///   custom:            user function with a declared Lipschitz constant
/// multiplied by optional modulation factors
///   (1 + periodic_amp cos(2 pi periodic_mode y_bar)) (1 + vertical_slope y_n)   [g]
///   (1 + arc_amp cos(2 pi arc_mode s / |N|))                                   [h]
///   (1 + time_amp sin(2 pi time_freq t))
struct RateSpec {
  RateKind kind = RateKind::Zero;
  double lambda = 0.0;
  double r = 0.0, u_cap = 1.0, clamp = 10.0;
  double kappa = 0.0, u_ext = 0.0;
  std::vector<double> table_u, table_v;
  RateFunction custom;
  double custom_lipschitz = 0.0;

  double periodic_amp = 0.0;
  int periodic_mode = 1;
  double vertical_slope = 0.0;
  double arc_amp = 0.0;
  int arc_mode = 1;
  double time_amp = 0.0;
  double time_freq = 1.0;

  static RateSpec zero() { return {}; }
  static RateSpec linear_decay(double lambda);
  static RateSpec logistic_clamped(double r, double u_cap, double clamp);
  static RateSpec exchange(double kappa, double u_ext);
  static RateSpec tabulated(std::vector<double> u, std::vector<double> v);
  static RateSpec custom_rate(RateFunction fn, double lipschitz);

  /// Throws ConfigError on inconsistent parameters.
  void validate(const std::string& where) const;

  /// Lipschitz constant of the unmodulated rate in u.
  double base_lipschitz() const;
  /// Upper bound of |modulation factor|.
  double modulation_bound() const;
  /// Declared Lipschitz constant L = base * modulation bound.
  double lipschitz() const { return base_lipschitz() * modulation_bound(); }

  /// Rate without modulation.
  double base(double u) const;
};

/// f+, f-, g and h of one problem.
struct KineticsSpec {
  RateSpec f_plus, f_minus, g, h;

  void validate() const;
  static KineticsSpec zero() { return {}; }
};

/// Bulk rate f+ (side > 0) or f- at a point of Omega+-.
double eval_f(const KineticsSpec& spec, int side, double t, Point2 x, double u);
/// Channel rate g(t, y, u) for y in the closure of Z*.
double eval_g(const KineticsSpec& spec, const CellGeometry& cell, double t, Point2 y, double u);
/// Boundary rate h(t, y, u) for y on N.
double eval_h(const KineticsSpec& spec, const CellGeometry& cell, double t, Point2 y, double u);

/// Largest sampled difference quotient of the rate over u in [-M, M]
/// (`samples` equidistant points) at a few positions and times.
double sampled_lipschitz(const RateSpec& rate, double M, int samples = 1000);

/// Microscopic coordinate of a cell center of a micro grid (or of the cell
/// grid), computed from integer indices so that all columns and the cell
/// problems see bit-identical positions.
Point2 local_cell_y(const RectGrid& grid, std::size_t a);
/// Microscopic coordinate of a face midpoint (same index arithmetic).
Point2 local_face_y(const RectGrid& grid, std::size_t face);

/// Pointwise rates on a micro grid: f+- on bulk cells and g(t, x/eps, u) on
/// channel cells.
Field sample_micro_kinetics(const KineticsSpec& spec, const MicroGeometry& geom, const Field& u, double t);
/// h(t, x/eps, u) on every lateral face (zero on other faces), using the
/// adjacent channel cell value as the trace.
std::vector<double> sample_boundary_kinetics(const KineticsSpec& spec, const MicroGeometry& geom, const Field& u,
                                             double t);

/// Closed-form initial value: a + b * vertical + c * cos(2 pi mode x_bar).
/// The vertical coordinate is x_n in the bulk and y_n in the channel.
struct InitialExpr {
  double a = 0.0, b = 0.0, c = 0.0;
  int mode = 1;
  std::function<double(double, Point2)> custom;  // (x_bar, point) if set

  static InitialExpr constant(double v) { return {v, 0.0, 0.0, 1, {}}; }
  static InitialExpr affine(double a, double b) { return {a, b, 0.0, 1, {}}; }
  double operator()(double xbar, double vertical, Point2 p) const;
};

struct InitialData {
  InitialExpr plus = InitialExpr::constant(0.0);
  InitialExpr minus = InitialExpr::constant(0.0);
  InitialExpr channel = InitialExpr::constant(0.0);

  double bulk(int side, Point2 x) const;
  /// u_i^M(x_bar, y) at the full microscopic point y.
  double cell(double xbar, Point2 y) const;
};

}  // namespace chanhom
