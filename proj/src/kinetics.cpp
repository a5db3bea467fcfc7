#include "chanhom/kinetics.hpp"

#include "chanhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chanhom {

const char* rate_kind_name(RateKind k) {
  switch (k) {
    case RateKind::Zero: return "zero";
    case RateKind::LinearDecay: return "linear_decay";
    case RateKind::LogisticClamped: return "logistic_clamped";
    case RateKind::Exchange: return "exchange";
    case RateKind::Tabulated: return "tabulated";
    case RateKind::Custom: return "custom";
  }
  return "?";
}

RateKind parse_rate_kind(const std::string& name) {
  for (auto k : {RateKind::Zero, RateKind::LinearDecay, RateKind::LogisticClamped, RateKind::Exchange,
                 RateKind::Tabulated}) {
    if (name == rate_kind_name(k)) return k;
  }
  throw ConfigError("unknown kinetics kind '" + name + "'");
}

RateSpec RateSpec::linear_decay(double lambda) {
  RateSpec s;
  s.kind = RateKind::LinearDecay;
  s.lambda = lambda;
  return s;
}

RateSpec RateSpec::logistic_clamped(double r, double u_cap, double clamp) {
  RateSpec s;
  s.kind = RateKind::LogisticClamped;
  s.r = r;
  s.u_cap = u_cap;
  s.clamp = clamp;
  return s;
}

RateSpec RateSpec::exchange(double kappa, double u_ext) {
  RateSpec s;
  s.kind = RateKind::Exchange;
  s.kappa = kappa;
  s.u_ext = u_ext;
  return s;
}

RateSpec RateSpec::tabulated(std::vector<double> u, std::vector<double> v) {
  RateSpec s;
  s.kind = RateKind::Tabulated;
  s.table_u = std::move(u);
  s.table_v = std::move(v);
  return s;
}

RateSpec RateSpec::custom_rate(RateFunction fn, double lipschitz) {
  RateSpec s;
  s.kind = RateKind::Custom;
  s.custom = std::move(fn);
  s.custom_lipschitz = lipschitz;
  return s;
}

void RateSpec::validate(const std::string& where) const {
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) throw ConfigError(where + "." + name + " must be finite");
  };
  finite(lambda, "lambda");
  finite(r, "r");
  finite(kappa, "kappa");
  finite(u_ext, "u_ext");
  switch (kind) {
    case RateKind::LogisticClamped:
      if (!(u_cap > 0.0)) throw ConfigError(where + ".u_cap must be positive");
      if (!(clamp > 0.0) || !std::isfinite(clamp)) throw ConfigError(where + ".clamp must be positive");
      break;
    case RateKind::Tabulated:
      if (table_u.size() < 2 || table_u.size() != table_v.size())
        throw ConfigError(where + ".table needs at least two (u, value) pairs");
      for (std::size_t i = 1; i < table_u.size(); ++i)
        if (!(table_u[i] > table_u[i - 1])) throw ConfigError(where + ".table u values must be strictly increasing");
      for (double v : table_v) finite(v, "table");
      break;
    case RateKind::Custom:
      if (!custom) throw ConfigError(where + ": custom rate without a function");
      if (!(custom_lipschitz >= 0.0)) throw ConfigError(where + ": custom rate needs a Lipschitz constant");
      break;
    default: break;
  }
  if (std::abs(periodic_amp) >= 1.0 || std::abs(arc_amp) >= 1.0 || std::abs(time_amp) >= 1.0)
    throw ConfigError(where + ": modulation amplitudes must lie in (-1, 1)");
  if (std::abs(vertical_slope) >= 1.0) throw ConfigError(where + ".vertical_slope must lie in (-1, 1)");
}

double RateSpec::base_lipschitz() const {
  switch (kind) {
    case RateKind::Zero: return 0.0;
    case RateKind::LinearDecay: return std::abs(lambda);
    case RateKind::LogisticClamped: return std::abs(r) * (1.0 + 2.0 * clamp / u_cap);
    case RateKind::Exchange: return std::abs(kappa);
    case RateKind::Tabulated: {
      double L = 0.0;
      for (std::size_t i = 1; i < table_u.size(); ++i)
        L = std::max(L, std::abs(table_v[i] - table_v[i - 1]) / (table_u[i] - table_u[i - 1]));
      return L;
    }
    case RateKind::Custom: return custom_lipschitz;
  }
  return 0.0;
}

double RateSpec::modulation_bound() const {
  return (1.0 + std::abs(periodic_amp)) * (1.0 + std::abs(vertical_slope)) * (1.0 + std::abs(arc_amp)) *
         (1.0 + std::abs(time_amp));
}

double RateSpec::base(double u) const {
  switch (kind) {
    case RateKind::Zero: return 0.0;
    case RateKind::LinearDecay: return -lambda * u;
    case RateKind::LogisticClamped: {
      auto raw = [&](double v) { return r * v * (1.0 - v / u_cap); };
      auto slope = [&](double v) { return r * (1.0 - 2.0 * v / u_cap); };
      if (u > clamp) return raw(clamp) + slope(clamp) * (u - clamp);
      if (u < -clamp) return raw(-clamp) + slope(-clamp) * (u + clamp);
      return raw(u);
    }
    case RateKind::Exchange: return kappa * (u - u_ext);
    case RateKind::Tabulated: {
      if (u <= table_u.front()) return table_v.front();
      if (u >= table_u.back()) return table_v.back();
      const auto it = std::upper_bound(table_u.begin(), table_u.end(), u);
      const auto i = static_cast<std::size_t>(it - table_u.begin());
      const double s = (u - table_u[i - 1]) / (table_u[i] - table_u[i - 1]);
      return table_v[i - 1] + s * (table_v[i] - table_v[i - 1]);
    }
    case RateKind::Custom: return 0.0;  // handled by the caller
  }
  return 0.0;
}

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double time_factor(const RateSpec& s, double t) {
  return s.time_amp == 0.0 ? 1.0 : 1.0 + s.time_amp * std::sin(two_pi * s.time_freq * t);
}

double cell_factor(const RateSpec& s, Point2 y) {
  double f = 1.0;
  if (s.periodic_amp != 0.0) f *= 1.0 + s.periodic_amp * std::cos(two_pi * s.periodic_mode * y.x);
  if (s.vertical_slope != 0.0) f *= 1.0 + s.vertical_slope * y.y;
  return f;
}

double evaluate(const RateSpec& s, double t, Point2 pos, double u, double factor) {
  const double base = s.kind == RateKind::Custom ? s.custom(t, pos, u) : s.base(u);
  return base * factor * time_factor(s, t);
}

void check_args(double t, double u) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("kinetics evaluated at invalid time " + std::to_string(t));
  if (!std::isfinite(u)) throw DomainError("kinetics evaluated at a non-finite state");
}

}  // namespace

void KineticsSpec::validate() const {
  f_plus.validate("kinetics.f_plus");
  f_minus.validate("kinetics.f_minus");
  g.validate("kinetics.g");
  h.validate("kinetics.h");
}

double eval_f(const KineticsSpec& spec, int side, double t, Point2 x, double u) {
  check_args(t, u);
  if (x.x < 0.0 || x.x > 1.0 || side * x.y < 0.0) throw DomainError("f evaluated outside its bulk domain");
  const RateSpec& s = side > 0 ? spec.f_plus : spec.f_minus;
  return evaluate(s, t, x, u, 1.0);
}

double eval_g(const KineticsSpec& spec, const CellGeometry& cell, double t, Point2 y, double u) {
  check_args(t, u);
  if (!cell.contains_closure(y, 1e-12)) throw DomainError("g evaluated outside the channel cell");
  return evaluate(spec.g, t, y, u, cell_factor(spec.g, y));
}

double eval_h(const KineticsSpec& spec, const CellGeometry& cell, double t, Point2 y, double u) {
  check_args(t, u);
  if (!cell.on_lateral(y, 1e-12)) throw DomainError("h evaluated off the lateral channel boundary");
  double factor = 1.0;
  if (spec.h.arc_amp != 0.0) {
    const double s = cell.arc_position(y, 1e-12) / to_double(cell.lateral_length());
    factor = 1.0 + spec.h.arc_amp * std::cos(two_pi * spec.h.arc_mode * s);
  }
  return evaluate(spec.h, t, y, u, factor);
}

double sampled_lipschitz(const RateSpec& rate, double M, int samples) {
  if (samples < 2) samples = 2;
  double L = 0.0;
  const Point2 positions[] = {{0.5, 0.0}, {0.3, 0.7}, {0.7, -0.9}};
  for (double t : {0.0, 0.125, 0.37}) {
    for (const Point2& p : positions) {
      double prev_u = -M;
      double prev = evaluate(rate, t, p, prev_u, 1.0);
      for (int i = 1; i < samples; ++i) {
        const double u = -M + 2.0 * M * i / (samples - 1);
        const double v = evaluate(rate, t, p, u, 1.0);
        L = std::max(L, std::abs(v - prev) / (u - prev_u));
        prev = v;
        prev_u = u;
      }
    }
  }
  return L;
}

Point2 local_cell_y(const RectGrid& grid, std::size_t a) {
  if (grid.kind() == GridKind::MacroBulk) throw ValidationError("local_cell_y needs a micro or cell grid");
  const auto [i, j] = grid.ij(a);
  const auto k = static_cast<std::size_t>(grid.refinement);
  const double kd = static_cast<double>(k);
  const auto iy = static_cast<double>(j) - static_cast<double>(grid.layer_row_begin);
  return Point2{(static_cast<double>(i % k) + 0.5) / kd, -1.0 + (iy + 0.5) / kd};
}

Point2 local_face_y(const RectGrid& grid, std::size_t face) {
  const Face& f = grid.faces()[face];
  Point2 y = local_cell_y(grid, static_cast<std::size_t>(f.a));
  const double half = 0.5 / static_cast<double>(grid.refinement);
  const double dir = f.internal() ? 1.0 : static_cast<double>(f.outward);
  if (f.axis == 0) y.x += dir * half; else y.y += dir * half;
  return y;
}

Field sample_micro_kinetics(const KineticsSpec& spec, const MicroGeometry& geom, const Field& u, double t) {
  const auto& grid = *u.grid;
  if (grid.kind() != GridKind::Micro) throw ValidationError("sample_micro_kinetics needs a micro field");
  std::vector<double> rates(grid.active_count());
  for (std::size_t a = 0; a < grid.active_count(); ++a) {
    switch (grid.region(a)) {
      case Region::BulkPlus: rates[a] = eval_f(spec, +1, t, grid.center(a), u.values[a]); break;
      case Region::BulkMinus: rates[a] = eval_f(spec, -1, t, grid.center(a), u.values[a]); break;
      case Region::Channel: rates[a] = eval_g(spec, geom.cell(), t, local_cell_y(grid, a), u.values[a]); break;
      case Region::Void: break;
    }
  }
  return Field(u.grid, std::move(rates), t);
}

std::vector<double> sample_boundary_kinetics(const KineticsSpec& spec, const MicroGeometry& geom, const Field& u,
                                             double t) {
  const auto& grid = *u.grid;
  std::vector<double> h(grid.faces().size(), 0.0);
  for (std::size_t f = 0; f < grid.faces().size(); ++f) {
    const Face& face = grid.faces()[f];
    if (face.kind != FaceKind::Lateral) continue;
    h[f] = eval_h(spec, geom.cell(), t, local_face_y(grid, f), u.values[face.a]);
  }
  return h;
}

double InitialExpr::operator()(double xbar, double vertical, Point2 p) const {
  if (custom) return custom(xbar, p);
  double v = a + b * vertical;
  if (c != 0.0) v += c * std::cos(two_pi * mode * xbar);
  return v;
}

double InitialData::bulk(int side, Point2 x) const {
  return side > 0 ? plus(x.x, x.y, x) : minus(x.x, x.y, x);
}

double InitialData::cell(double xbar, Point2 y) const { return channel(xbar, y.y, y); }

}  // namespace chanhom
