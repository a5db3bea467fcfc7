#include "chanhom/twoscale.hpp"

#include "chanhom/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chanhom {

namespace {

double rel(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

int dir_of(const RectGrid& g, std::size_t a, std::int32_t face) {
  const auto& cf = g.cell_faces(a);
  for (int d = 0; d < 4; ++d)
    if (cf[d] == face) return d;
  throw AssemblyError("face is not attached to the cell");
}

}  // namespace

UnfoldingMap build_unfolding_map(std::shared_ptr<const RectGrid> micro, std::shared_ptr<const RectGrid> cell) {
  if (!micro || !cell || micro->kind() != GridKind::Micro || cell->kind() != GridKind::Cell)
    throw ValidationError("unfolding needs a micro grid and a cell grid");
  if (micro->refinement != cell->refinement)
    throw AlignmentError("unfolding needs equal layer and cell refinements (k=" + std::to_string(micro->refinement) +
                         ", m=" + std::to_string(cell->refinement) + ")");
  UnfoldingMap map;
  map.micro = micro;
  map.cell = cell;
  map.eps = micro->eps;
  const auto k = static_cast<std::size_t>(micro->refinement);
  map.columns = micro->nx() / k;
  const std::size_t nc = cell->active_count();

  map.micro_of.resize(map.columns * nc);
  for (std::size_t col = 0; col < map.columns; ++col) {
    for (std::size_t c = 0; c < nc; ++c) {
      const auto [ix, iy] = cell->ij(c);
      const auto a = micro->active(col * k + ix, micro->layer_row_begin + iy);
      if (a < 0 || micro->region(static_cast<std::size_t>(a)) != Region::Channel)
        throw AlignmentError("micro layer does not match the cell grid");
      map.micro_of[col * nc + c] = a;
    }
  }
  for (std::size_t f = 0; f < cell->faces().size(); ++f)
    if (cell->faces()[f].kind == FaceKind::Lateral) map.lateral.push_back(static_cast<std::int32_t>(f));
  const std::size_t nl = map.lateral.size();
  map.micro_lateral.resize(map.columns * nl);
  for (std::size_t col = 0; col < map.columns; ++col) {
    for (std::size_t q = 0; q < nl; ++q) {
      const Face& cf = cell->faces()[static_cast<std::size_t>(map.lateral[q])];
      const auto c = static_cast<std::size_t>(cf.a);
      const int d = dir_of(*cell, c, map.lateral[q]);
      const auto ma = static_cast<std::size_t>(map.micro_of[col * nc + c]);
      const std::int32_t mf = micro->cell_faces(ma)[d];
      if (mf < 0 || micro->faces()[static_cast<std::size_t>(mf)].kind != FaceKind::Lateral)
        throw AlignmentError("lateral faces of the micro layer do not match the cell grid");
      map.micro_lateral[col * nl + q] = mf;
    }
  }
  return map;
}

TwoScaleField unfold(const UnfoldingMap& map, const Field& v) {
  if (v.grid != map.micro) throw ValidationError("field does not live on the unfolding grid");
  TwoScaleField out;
  out.cell = map.cell;
  out.nodes = map.columns;
  out.time = v.time;
  out.eps = map.eps;
  out.values.resize(map.micro_of.size());
  for (std::size_t i = 0; i < map.micro_of.size(); ++i) out.values[i] = v.values[static_cast<std::size_t>(map.micro_of[i])];
  return out;
}

std::vector<double> unfold_boundary(const UnfoldingMap& map, std::span<const double> face_values) {
  if (face_values.size() != map.micro->faces().size()) throw ValidationError("boundary values do not match the grid");
  std::vector<double> out(map.micro_lateral.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = face_values[static_cast<std::size_t>(map.micro_lateral[i])];
  return out;
}

Field average(const UnfoldingMap& map, const TwoScaleField& phi) {
  if (phi.cell != map.cell) throw ValidationError("two-scale field does not match the cell grid");
  if (phi.nodes == 0 || phi.nodes % map.columns != 0)
    throw AlignmentError("two-scale nodes must refine the eps columns");
  const std::size_t per = phi.nodes / map.columns;
  const std::size_t nc = map.cell_count();
  std::vector<double> v(map.micro->active_count(), 0.0);
  for (std::size_t col = 0; col < map.columns; ++col) {
    for (std::size_t c = 0; c < nc; ++c) {
      double s = 0.0;
      for (std::size_t q = 0; q < per; ++q) s += phi.at(col * per + q, c);
      v[static_cast<std::size_t>(map.micro_of[col * nc + c])] = s / static_cast<double>(per);
    }
  }
  return Field(map.micro, std::move(v), phi.time);
}

double inner_product_two_scale(const TwoScaleField& a, const TwoScaleField& b) {
  if (a.cell != b.cell || a.nodes != b.nodes) throw ValidationError("two-scale fields do not match");
  const std::size_t nc = a.cell->active_count();
  double s = 0.0;
  for (std::size_t j = 0; j < a.nodes; ++j) {
    double col = 0.0;
    for (std::size_t c = 0; c < nc; ++c) col += a.cell->volume(c) * a.at(j, c) * b.at(j, c);
    s += col;
  }
  return s / static_cast<double>(a.nodes);
}

double boundary_norm_sq_two_scale(const UnfoldingMap& map, std::span<const double> unfolded) {
  const std::size_t nl = map.lateral_count();
  double s = 0.0;
  for (std::size_t col = 0; col < map.columns; ++col) {
    double c = 0.0;
    for (std::size_t q = 0; q < nl; ++q) {
      const double len = map.cell->faces()[static_cast<std::size_t>(map.lateral[q])].length;
      c += len * unfolded[col * nl + q] * unfolded[col * nl + q];
    }
    s += c;
  }
  return s / static_cast<double>(map.columns);
}

double channel_inner(const Field& a, const Field& b) {
  if (a.grid != b.grid) throw ValidationError("fields live on different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a.grid->region(i) == Region::Channel) s += a.grid->volume(i) * a.values[i] * b.values[i];
  return s;
}

double channel_l2_sq(const Field& v) { return channel_inner(v, v); }

double lateral_l2_sq(const RectGrid& grid, std::span<const double> face_values) {
  double s = 0.0;
  for (std::size_t f = 0; f < grid.faces().size(); ++f)
    if (grid.faces()[f].kind == FaceKind::Lateral) s += grid.faces()[f].length * face_values[f] * face_values[f];
  return s;
}

std::vector<double> lateral_trace(const Field& v) {
  const auto& faces = v.grid->faces();
  std::vector<double> t(faces.size(), 0.0);
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (faces[f].kind == FaceKind::Lateral) t[f] = v.values[static_cast<std::size_t>(faces[f].a)];
  return t;
}

double IdentityResiduals::max() const {
  return std::max({isometry, boundary_norm, gradient, adjoint, round_trip, commutation, norm_bound});
}

IdentityResiduals check_unfolding_identities(const UnfoldingMap& map, const Field& v, const TwoScaleField& phi) {
  IdentityResiduals r;
  const double eps = map.eps;
  const TwoScaleField tv = unfold(map, v);

  r.isometry = rel(inner_product_two_scale(tv, tv), channel_l2_sq(v) / eps);

  const auto trace = lateral_trace(v);
  const auto tb = unfold_boundary(map, trace);
  r.boundary_norm = rel(boundary_norm_sq_two_scale(map, tb), lateral_l2_sq(*map.micro, trace));

  // Unfolded trace equals the trace of the unfolded field.
  const std::size_t nc = map.cell_count(), nl = map.lateral_count();
  double cmax = 0.0, cdiff = 0.0;
  for (std::size_t col = 0; col < map.columns; ++col) {
    for (std::size_t q = 0; q < nl; ++q) {
      const auto c = static_cast<std::size_t>(map.cell->faces()[static_cast<std::size_t>(map.lateral[q])].a);
      cdiff = std::max(cdiff, std::abs(tv.at(col, c) - tb[col * nl + q]));
      cmax = std::max(cmax, std::abs(tb[col * nl + q]));
    }
  }
  r.commutation = cmax > 0.0 ? cdiff / cmax : cdiff;

  // grad_y T v = eps T grad v on every channel face of every column.
  const auto gx = face_gradients(*map.micro, v.values);
  const auto& cfaces = map.cell->faces();
  double gmax = 0.0, gdiff = 0.0;
  for (std::size_t col = 0; col < map.columns; ++col) {
    for (std::size_t f = 0; f < cfaces.size(); ++f) {
      const Face& face = cfaces[f];
      if (!face.internal()) continue;
      const auto a = static_cast<std::size_t>(face.a), b = static_cast<std::size_t>(face.b);
      const double gy = (tv.at(col, b) - tv.at(col, a)) / (face.dist_a + face.dist_b);
      const int d = dir_of(*map.cell, a, static_cast<std::int32_t>(f));
      const auto ma = static_cast<std::size_t>(map.micro_of[col * nc + a]);
      const double ge = eps * gx[static_cast<std::size_t>(map.micro->cell_faces(ma)[d])];
      gdiff = std::max(gdiff, std::abs(gy - ge));
      gmax = std::max(gmax, std::abs(ge));
    }
  }
  r.gradient = gmax > 0.0 ? gdiff / gmax : gdiff;

  // Adjointness, measured against ||T v|| ||phi|| since the pairing itself may cancel.
  const Field uphi = average(map, phi);
  TwoScaleField fine = phi;
  const std::size_t per = phi.nodes / map.columns;
  for (std::size_t j = 0; j < phi.nodes; ++j)
    for (std::size_t c = 0; c < nc; ++c) fine.values[j * nc + c] = tv.at(j / per, c);
  const double scale = std::sqrt(inner_product_two_scale(fine, fine) * inner_product_two_scale(phi, phi));
  const double gap = std::abs(inner_product_two_scale(fine, phi) - channel_inner(v, uphi) / eps);
  r.adjoint = scale > 0.0 ? gap / scale : gap;

  const Field back = average(map, tv);
  double rmax = 0.0, rdiff = 0.0;
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (v.grid->region(i) != Region::Channel) continue;
    rdiff = std::max(rdiff, std::abs(back.values[i] - v.values[i]));
    rmax = std::max(rmax, std::abs(v.values[i]));
  }
  r.round_trip = rmax > 0.0 ? rdiff / rmax : rdiff;

  const double lhs = std::sqrt(channel_l2_sq(uphi));
  const double rhs = std::sqrt(eps * inner_product_two_scale(phi, phi));
  r.norm_bound = lhs > rhs ? (lhs - rhs) / std::max(rhs, 1e-300) : 0.0;
  return r;
}

TwoScaleField macro_cell_field(const InterfaceLayout& layout, const MacroState& s) {
  TwoScaleField f;
  f.cell = layout.cell_grid;
  f.nodes = layout.nodes;
  f.time = s.t;
  const std::size_t nc = layout.cell_count();
  f.values.resize(layout.nodes * nc);
  for (std::size_t j = 0; j < layout.nodes; ++j) {
    const auto cells = s.cell(layout, j);
    std::copy(cells.begin(), cells.end(), f.values.begin() + static_cast<std::ptrdiff_t>(j * nc));
  }
  return f;
}

double trapezoid_sqrt(std::span<const double> times, std::span<const double> q) {
  if (times.size() != q.size() || times.empty()) throw ValidationError("trapezoid needs matching samples");
  if (times.size() == 1) return 0.0;
  double s = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) s += 0.5 * (times[i] - times[i - 1]) * (q[i] + q[i - 1]);
  return std::sqrt(s);
}

namespace {

struct Overlap {
  std::int32_t micro;  // -1: outside the micro bulk (chi extension by zero)
  std::int32_t macro;
  double area;
};

std::vector<double> merge_axis(std::vector<double> a, const std::vector<double>& b, double lo, double hi) {
  a.insert(a.end(), b.begin(), b.end());
  a.push_back(lo);
  a.push_back(hi);
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double x : a) {
    if (x < lo - 1e-13 || x > hi + 1e-13) continue;
    if (out.empty() || x - out.back() > 1e-13) out.push_back(x);
  }
  return out;
}

std::size_t locate(const std::vector<double>& axis, double x) {
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - axis.begin() - 1, 0,
                                                             static_cast<std::ptrdiff_t>(axis.size()) - 2));
}

// Common refinement of the micro bulk grid and the macro bulk grid on one side.
std::vector<Overlap> bulk_overlaps(const RectGrid& micro, const RectGrid& macro, int side) {
  const double H = macro.ys().back();
  const double lo = side > 0 ? 0.0 : -H, hi = side > 0 ? H : 0.0;
  const auto xs = merge_axis(micro.xs(), macro.xs(), 0.0, 1.0);
  const auto ys = merge_axis(micro.ys(), macro.ys(), lo, hi);
  const Region want = side > 0 ? Region::BulkPlus : Region::BulkMinus;
  std::vector<Overlap> out;
  for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
    const double ym = 0.5 * (ys[j] + ys[j + 1]);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const double xm = 0.5 * (xs[i] + xs[i + 1]);
      const auto mi = locate(micro.xs(), xm), mj = locate(micro.ys(), ym);
      std::int32_t ma = micro.active(mi, mj);
      if (ma >= 0 && micro.region(static_cast<std::size_t>(ma)) != want) ma = -1;
      const std::int32_t Ma = macro.active(locate(macro.xs(), xm), locate(macro.ys(), ym));
      if (Ma < 0) throw AssemblyError("macro bulk grid does not cover the domain");
      out.push_back({ma, Ma, (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])});
    }
  }
  return out;
}

}  // namespace

TwoScaleErrors ts_error(const MicroTrajectory& micro, const MacroTrajectory& macro, const UnfoldingMap& map) {
  const InterfaceLayout& l = macro.layout;
  if (micro.snapshots.size() != macro.snapshots.size())
    throw ValidationError("micro and macro trajectories have different snapshot counts");
  if (l.cell_grid->refinement != map.cell->refinement) throw AlignmentError("macro cell grid differs from the map");
  if (l.nodes % map.columns != 0) throw AlignmentError("macro interface nodes must refine the eps columns");
  if (std::abs(l.bulk->ys().back() - micro.grid->ys().back()) > 1e-12)
    throw ValidationError("micro and macro bulk heights differ");
  const std::size_t per = l.nodes / map.columns;
  const std::size_t nc = map.cell_count(), nl = map.lateral_count();
  const auto& cg = *l.cell_grid;

  const auto plus = bulk_overlaps(*micro.grid, *l.bulk, +1);
  const auto minus = bulk_overlaps(*micro.grid, *l.bulk, -1);
  auto bulk_sq = [](const std::vector<Overlap>& ov, const Field& u, std::span<const double> U) {
    double s = 0.0;
    for (const auto& o : ov) {
      const double um = o.micro >= 0 ? u.values[static_cast<std::size_t>(o.micro)] : 0.0;
      const double d = um - U[static_cast<std::size_t>(o.macro)];
      s += o.area * d * d;
    }
    return s;
  };

  const std::size_t n = micro.snapshots.size();
  std::vector<double> times(n), qc(n), qn(n), qp(n), qm(n);
  for (std::size_t s = 0; s < n; ++s) {
    const Field& u = micro.snapshots[s];
    const MacroState& M = macro.snapshots[s];
    if (std::abs(u.time - M.t) > 1e-12) throw ValidationError("micro and macro snapshot times differ");
    times[s] = u.time;
    const TwoScaleField tu = unfold(map, u);
    double chan = 0.0, lat = 0.0;
    for (std::size_t j = 0; j < l.nodes; ++j) {
      const std::size_t col = j / per;
      const auto cells = M.cell(l, j);
      double cj = 0.0;
      for (std::size_t c = 0; c < nc; ++c) {
        const double d = tu.at(col, c) - cells[c];
        cj += cg.volume(c) * d * d;
      }
      double nj = 0.0;
      for (std::size_t q = 0; q < nl; ++q) {
        const Face& f = cg.faces()[static_cast<std::size_t>(map.lateral[q])];
        const double d = tu.at(col, static_cast<std::size_t>(f.a)) - cells[static_cast<std::size_t>(f.a)];
        nj += f.length * d * d;
      }
      chan += cj;
      lat += nj;
    }
    qc[s] = chan * l.dsigma;
    qn[s] = lat * l.dsigma;
    qp[s] = bulk_sq(plus, u, M.bulk(l));
    qm[s] = bulk_sq(minus, u, M.bulk(l));
  }
  TwoScaleErrors e;
  e.e_chan = trapezoid_sqrt(times, qc);
  e.e_n = trapezoid_sqrt(times, qn);
  e.e_bulk_plus = trapezoid_sqrt(times, qp);
  e.e_bulk_minus = trapezoid_sqrt(times, qm);
  return e;
}

double apriori_norm(const MicroTrajectory& traj) {
  std::vector<double> times, q;
  for (const Field& u : traj.snapshots) {
    const double h = norm_Heps(u);
    times.push_back(u.time);
    q.push_back(h * h);
  }
  return trapezoid_sqrt(times, q);
}

ShiftDiagnostic shift_diagnostic(const MicroTrajectory& traj, std::int64_t l, double h) {
  const RectGrid& g = *traj.grid;
  const double eps = traj.eps;
  const auto k = static_cast<std::int64_t>(g.refinement);
  if (!(h > 0.0) || h >= 0.5) throw ValidationError("shift margin must lie in (0, 1/2)");
  if (l == 0) throw ValidationError("shift must be non-zero");
  const double inner = h, outer = 0.5 * h;
  if (std::abs(static_cast<double>(l)) * eps > outer + 1e-12)
    throw DomainError("shift exits the domain (|eps l| > h/2)");

  auto column_inside = [&](std::int64_t col, double margin) {
    return static_cast<double>(col) * eps >= margin - 1e-12 && static_cast<double>(col + 1) * eps <= 1.0 - margin + 1e-12;
  };
  auto cell_inside = [&](std::size_t i, double margin) {
    return g.xs()[i] >= margin - 1e-12 && g.xs()[i + 1] <= 1.0 - margin + 1e-12;
  };

  // Shift partner of each active cell, or -1 if not used.
  std::vector<std::int32_t> partner(g.active_count(), -1);
  std::vector<char> lhs_cell(g.active_count(), 0), rhs_cell(g.active_count(), 0);
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    const auto [i, j] = g.ij(a);
    const auto si = static_cast<std::int64_t>(i) + l * k;
    if (si < 0 || si >= static_cast<std::int64_t>(g.nx())) continue;
    const auto b = g.active(static_cast<std::size_t>(si), j);
    if (b < 0) continue;
    const auto col = static_cast<std::int64_t>(i) / k;
    if (g.region(a) == Region::Channel) {
      if (column_inside(col, inner)) lhs_cell[a] = 1;
      if (column_inside(col, outer)) rhs_cell[a] = 1;
    } else if (cell_inside(i, outer)) {
      rhs_cell[a] = 1;
    }
    if (lhs_cell[a] || rhs_cell[a]) partner[a] = b;
  }

  const std::size_t n = traj.snapshots.size();
  std::vector<double> times(n), qgrad(n), qbulk(n);
  ShiftDiagnostic d;
  for (std::size_t s = 0; s < n; ++s) {
    const Field& u = traj.snapshots[s];
    times[s] = u.time;
    std::vector<double> du(g.active_count(), 0.0);
    double chan = 0.0, bulk = 0.0, init = 0.0;
    for (std::size_t a = 0; a < g.active_count(); ++a) {
      if (partner[a] < 0) continue;
      const double v = u.values[static_cast<std::size_t>(partner[a])] - u.values[a];
      const bool channel = g.region(a) == Region::Channel;
      if (lhs_cell[a]) {
        du[a] = v;
        chan += g.volume(a) * v * v;
      }
      if (rhs_cell[a]) {
        if (!channel) bulk += g.volume(a) * v * v;
        init += (channel ? 1.0 / eps : 1.0) * g.volume(a) * v * v;
      }
    }
    d.chan_sup = std::max(d.chan_sup, std::sqrt(chan));
    const auto grads = face_gradients(g, du);
    qgrad[s] = gradient_parts(g, grads, true).channel;
    qbulk[s] = bulk;
    if (s == 0) d.init_shift = std::sqrt(init);
  }
  d.chan_grad = trapezoid_sqrt(times, qgrad);
  d.bulk_shift = trapezoid_sqrt(times, qbulk);
  d.lhs = d.chan_sup / std::sqrt(eps) + std::sqrt(eps) * d.chan_grad;
  d.rhs = eps + d.init_shift + d.bulk_shift;
  d.ratio = d.lhs / d.rhs;
  return d;
}

namespace {

struct BasisIndex {
  int a, b;
};

std::vector<BasisIndex> basis_indices(std::size_t count) {
  std::vector<BasisIndex> all;
  for (int a = 0; a < 12; ++a)
    for (int b = 0; b < 12; ++b) all.push_back({a, b});
  std::stable_sort(all.begin(), all.end(), [](const BasisIndex& p, const BasisIndex& q) {
    const int fp = p.a * p.a + p.b * p.b, fq = q.a * q.a + q.b * q.b;
    if (fp != fq) return fp < fq;
    return p.a < q.a;
  });
  all.resize(std::min(count, all.size()));
  return all;
}

}  // namespace

std::vector<double> trace_basis_function(const RectGrid& cell_grid, std::size_t p) {
  const auto idx = basis_indices(p + 1)[p];
  std::vector<double> v(cell_grid.active_count());
  for (std::size_t c = 0; c < v.size(); ++c) {
    const Point2 y = cell_grid.center(c);
    v[c] = std::cos(std::numbers::pi * idx.a * y.x) * std::cos(std::numbers::pi * idx.b * 0.5 * (y.y + 1.0));
  }
  return v;
}

TraceCalibration calibrate_trace_constant(const RectGrid& cell_grid, double theta, std::size_t basis) {
  if (!(theta > 0.0)) throw ValidationError("theta must be positive");
  const std::size_t nb = basis;
  std::vector<std::vector<double>> phi(nb);
  for (std::size_t p = 0; p < nb; ++p) phi[p] = trace_basis_function(cell_grid, p);

  auto mass = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += cell_grid.volume(c) * a[c] * b[c];
    return s;
  };
  auto boundary = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (const Face& f : cell_grid.faces())
      if (f.kind == FaceKind::Lateral) s += f.length * a[static_cast<std::size_t>(f.a)] * b[static_cast<std::size_t>(f.a)];
    return s;
  };
  auto grad_sq = [&](const std::vector<double>& a) {
    return gradient_parts(cell_grid, face_gradients(cell_grid, a), true).channel;
  };

  Eigen::MatrixXd M(nb, nb), K(nb, nb);
  std::vector<double> gdiag(nb);
  for (std::size_t p = 0; p < nb; ++p) gdiag[p] = grad_sq(phi[p]);
  for (std::size_t p = 0; p < nb; ++p) {
    for (std::size_t q = p; q < nb; ++q) {
      std::vector<double> sum(phi[p].size());
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = phi[p][c] + phi[q][c];
      const double G = p == q ? gdiag[p] : 0.5 * (grad_sq(sum) - gdiag[p] - gdiag[q]);
      M(p, q) = M(q, p) = mass(phi[p], phi[q]);
      K(p, q) = K(q, p) = boundary(phi[p], phi[q]) - theta * theta * G;
    }
  }
  // Orthonormalize the (possibly rank deficient) span through the Gram matrix.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(M);
  const auto& lam = gram.eigenvalues();
  const double cut = 1e-12 * lam.maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > cut) keep.push_back(i);
  Eigen::MatrixXd W(nb, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i)
    W.col(static_cast<Eigen::Index>(i)) = gram.eigenvectors().col(keep[i]) / std::sqrt(lam(keep[i]));
  const Eigen::MatrixXd R = W.transpose() * K * W;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> red(0.5 * (R + R.transpose()));

  TraceCalibration cal;
  cal.theta = theta;
  cal.basis = nb;
  cal.rank = keep.size();
  cal.constant = std::sqrt(std::max(0.0, red.eigenvalues().maxCoeff()));
  return cal;
}

TraceInequality trace_inequality_diagnostic(const Field& v, double theta, const TraceCalibration& cal) {
  const RectGrid& g = *v.grid;
  if (g.kind() != GridKind::Micro) throw ValidationError("trace inequality needs a micro field");
  const double eps = g.eps;
  TraceInequality t;
  t.lhs = std::sqrt(lateral_l2_sq(g, lateral_trace(v)));
  t.rhs_mass = cal.constant / std::sqrt(eps) * std::sqrt(channel_l2_sq(v));
  const auto grads = face_gradients(g, v.values);
  t.rhs_grad = theta * std::sqrt(eps) * std::sqrt(gradient_parts(g, grads, true).channel);
  return t;
}

}  // namespace chanhom
