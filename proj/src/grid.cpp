#include "chanhom/grid.hpp"

#include "chanhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chanhom {

const char* face_kind_name(FaceKind k) {
  switch (k) {
    case FaceKind::Interior: return "interior";
    case FaceKind::Interface: return "interface";
    case FaceKind::Lateral: return "lateral";
    case FaceKind::Outer: return "outer";
    case FaceKind::Top: return "top";
    case FaceKind::Bottom: return "bottom";
    case FaceKind::Sigma: return "sigma";
  }
  return "?";
}

RectGrid::RectGrid(GridKind kind, std::vector<double> xs, std::vector<double> ys, std::vector<Region> tags)
    : kind_(kind), xs_(std::move(xs)), ys_(std::move(ys)), tags_(std::move(tags)) {
  if (xs_.size() < 2 || ys_.size() < 2) throw ValidationError("grid needs at least one cell per axis");
  for (auto* axis : {&xs_, &ys_})
    for (std::size_t i = 1; i < axis->size(); ++i)
      if (!((*axis)[i] > (*axis)[i - 1])) throw ValidationError("grid coordinates must be strictly increasing");
  if (tags_.size() != nx() * ny()) throw ValidationError("grid tag count mismatch");

  active_of_cell_.assign(tags_.size(), -1);
  for (std::size_t c = 0; c < tags_.size(); ++c) {
    if (tags_[c] != Region::Void) {
      active_of_cell_[c] = static_cast<std::int32_t>(cell_of_active_.size());
      cell_of_active_.push_back(c);
    }
  }
  build_faces();
}

Point2 RectGrid::center(std::size_t a) const {
  const auto [i, j] = ij(a);
  return Point2{0.5 * (xs_[i] + xs_[i + 1]), 0.5 * (ys_[j] + ys_[j + 1])};
}

double RectGrid::width(std::size_t a) const {
  const auto i = ij(a)[0];
  return xs_[i + 1] - xs_[i];
}

double RectGrid::height(std::size_t a) const {
  const auto j = ij(a)[1];
  return ys_[j + 1] - ys_[j];
}

void RectGrid::build_faces() {
  cell_faces_.assign(active_count(), {-1, -1, -1, -1});
  const auto n_x = static_cast<std::int64_t>(nx());
  const auto n_y = static_cast<std::int64_t>(ny());

  for (std::size_t a = 0; a < active_count(); ++a) {
    const auto [iu, ju] = ij(a);
    const auto i = static_cast<std::int64_t>(iu);
    const auto j = static_cast<std::int64_t>(ju);
    const Region ra = tags_[cell_of_active_[a]];

    for (int dir = 0; dir < 4; ++dir) {
      const std::uint8_t axis = dir < 2 ? 0 : 1;
      const int sign = (dir % 2 == 0) ? -1 : +1;
      const std::int64_t ni = i + (axis == 0 ? sign : 0);
      const std::int64_t nj = j + (axis == 1 ? sign : 0);
      const bool inside = ni >= 0 && ni < n_x && nj >= 0 && nj < n_y;
      const std::int32_t nb = inside ? active(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj)) : -1;

      const double half_a = 0.5 * (axis == 0 ? width(a) : height(a));
      const double len = axis == 0 ? height(a) : width(a);
      const Point2 c = center(a);
      Point2 mid = c;
      if (axis == 0) mid.x += sign * half_a; else mid.y += sign * half_a;

      const Region rb = nb >= 0 ? tags_[cell_of_active_[nb]] : Region::Void;
      const bool sigma_pair = kind_ == GridKind::MacroBulk && nb >= 0 && ra != rb;

      if (nb >= 0 && !sigma_pair) {
        if (sign < 0) continue;  // created from the lower cell
        Face f;
        f.a = static_cast<std::int32_t>(a);
        f.b = nb;
        f.axis = axis;
        f.length = len;
        f.dist_a = half_a;
        f.dist_b = 0.5 * (axis == 0 ? width(nb) : height(nb));
        f.mid = mid;
        if (ra == rb) {
          f.kind = FaceKind::Interior;
        } else {
          f.kind = FaceKind::Interface;
          f.side = (ra == Region::BulkPlus || rb == Region::BulkPlus) ? +1 : -1;
        }
        const auto id = static_cast<std::int32_t>(faces_.size());
        faces_.push_back(f);
        cell_faces_[a][dir] = id;
        cell_faces_[nb][dir ^ 1] = id;
        continue;
      }

      Face f;
      f.a = static_cast<std::int32_t>(a);
      f.b = -1;
      f.axis = axis;
      f.outward = static_cast<std::int8_t>(sign);
      f.length = len;
      f.dist_a = half_a;
      f.mid = mid;
      if (sigma_pair) {
        f.kind = FaceKind::Sigma;
        f.side = ra == Region::BulkPlus ? +1 : -1;
      } else if (inside) {
        // Neighbour is void.
        f.kind = ra == Region::Channel ? FaceKind::Lateral : FaceKind::Outer;
      } else if (kind_ == GridKind::Cell && axis == 1) {
        f.kind = FaceKind::Interface;
        f.side = static_cast<std::int8_t>(sign);
      } else if (axis == 1) {
        f.kind = sign > 0 ? FaceKind::Top : FaceKind::Bottom;
      } else {
        f.kind = FaceKind::Outer;
      }
      cell_faces_[a][dir] = static_cast<std::int32_t>(faces_.size());
      faces_.push_back(f);
    }
  }
}

std::vector<double> graded_spacings(double length, double first_coarse, std::int64_t sub, const GridOptions& opts) {
  if (!(length > 0.0) || !(first_coarse > 0.0) || sub < 1) throw ValidationError("invalid grading request");
  const double q = opts.grading_ratio;
  if (!(q >= 1.0) || q > 1.2 + 1e-12) throw ValidationError("grading ratio must lie in [1, 1.2]");
  const double hmax = std::max(opts.bulk_max_spacing, first_coarse);

  auto total = [&](std::int64_t n, double ratio) {
    double s = first_coarse, sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      sum += s;
      s = std::min(s * ratio, hmax);
    }
    return sum;
  };

  std::vector<double> coarse;
  std::int64_t n = 1;
  while (total(n, q) < length) ++n;
  if (static_cast<double>(n) * first_coarse >= length) {
    const auto m = static_cast<std::int64_t>(std::ceil(length / first_coarse - 1e-12));
    coarse.assign(static_cast<std::size_t>(m), length / static_cast<double>(m));
  } else {
    // Shrink the growth ratio so that n intervals fill the length exactly.
    double lo = 1.0, hi = q;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(n, mid) < length ? lo : hi) = mid;
    }
    double s = first_coarse;
    for (std::int64_t i = 0; i < n; ++i) {
      coarse.push_back(s);
      s = std::min(s * hi, hmax);
    }
    const double sum = std::accumulate(coarse.begin(), coarse.end(), 0.0);
    coarse.back() += length - sum;  // bisection leftover, O(1e-16)
  }

  std::vector<double> fine;
  fine.reserve(coarse.size() * static_cast<std::size_t>(sub));
  for (double c : coarse)
    for (std::int64_t s = 0; s < sub; ++s) fine.push_back(c / static_cast<double>(sub));
  return fine;
}

void check_alignment(const ChannelProfile& profile, std::int64_t k) {
  if (k < 1) throw AlignmentError("refinement must be a positive integer");
  for (const auto& s : profile.segments()) {
    for (const Rational& o : {s.y_lo, s.y_hi, Rational(1, 2) - s.width / 2, Rational(1, 2) + s.width / 2}) {
      if ((o * k).denominator() != 1) {
        throw AlignmentError("refinement k=" + std::to_string(k) + " does not align with the channel profile (offset " +
                             std::to_string(o.numerator()) + "/" + std::to_string(o.denominator()) +
                             " is not a multiple of 1/k)");
      }
    }
  }
}

namespace {

std::vector<double> uniform_axis(double lo, double hi, std::int64_t n) {
  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  for (std::int64_t i = 0; i <= n; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  v.back() = hi;
  return v;
}

// Coordinates of a bulk column from `start` moving away by the given spacings.
void append_from(std::vector<double>& axis, double start, double end, const std::vector<double>& spacing) {
  double pos = start;
  const double dir = end > start ? 1.0 : -1.0;
  for (std::size_t i = 0; i + 1 < spacing.size(); ++i) {
    pos += dir * spacing[i];
    axis.push_back(pos);
  }
  axis.push_back(end);
}

std::int64_t nesting_sub(std::int64_t k, std::int64_t alignment) {
  return (alignment > 0 && k % alignment == 0) ? k / alignment : 1;
}

}  // namespace

std::shared_ptr<const RectGrid> build_micro_grid(const MicroGeometry& geom, std::int64_t k, const GridOptions& opts) {
  const auto& profile = geom.cell().profile();
  check_alignment(profile, k);
  const double eps = geom.eps();
  const double H = geom.height();

  const auto xs = uniform_axis(0.0, 1.0, geom.columns() * k);

  const std::int64_t sub = nesting_sub(k, profile.alignment());
  const double first_coarse = eps / static_cast<double>(k) * static_cast<double>(sub);
  const auto bulk = graded_spacings(H - eps, first_coarse, sub, opts);

  // Bottom bulk (built downward from -eps, then reversed), layer, top bulk.
  std::vector<double> lower{-eps};
  append_from(lower, -eps, -H, bulk);
  std::reverse(lower.begin(), lower.end());
  std::vector<double> ys = lower;
  const std::size_t layer_begin = ys.size() - 1;
  const auto layer = uniform_axis(-eps, eps, 2 * k);
  ys.insert(ys.end(), layer.begin() + 1, layer.end());
  ys.back() = eps;
  append_from(ys, eps, H, bulk);

  const std::size_t nxc = xs.size() - 1, nyc = ys.size() - 1;
  std::vector<Region> tags(nxc * nyc);
  for (std::size_t j = 0; j < nyc; ++j) {
    for (std::size_t i = 0; i < nxc; ++i) {
      Region r;
      if (j < layer_begin) {
        r = Region::BulkMinus;
      } else if (j >= layer_begin + static_cast<std::size_t>(2 * k)) {
        r = Region::BulkPlus;
      } else {
        // Integer arithmetic inside the layer: local indices in the eps-cell.
        const auto li = static_cast<std::int64_t>(i) % k;
        const auto lj = static_cast<std::int64_t>(j - layer_begin);
        const Point2 y{(static_cast<double>(li) + 0.5) / static_cast<double>(k),
                       -1.0 + (static_cast<double>(lj) + 0.5) / static_cast<double>(k)};
        r = geom.cell().contains(y) ? Region::Channel : Region::Void;
      }
      tags[j * nxc + i] = r;
    }
  }
  auto grid = std::make_shared<RectGrid>(GridKind::Micro, xs, std::move(ys), std::move(tags));
  grid->eps = eps;
  grid->refinement = k;
  grid->layer_row_begin = layer_begin;
  return grid;
}

std::shared_ptr<const RectGrid> build_macro_bulk_grid(double height, std::int64_t sigma_nodes, std::int64_t sub,
                                                      const GridOptions& opts) {
  if (sigma_nodes < 1) throw ValidationError("need at least one interface node");
  if (sub < 1) sub = 1;
  const double dsigma = 1.0 / static_cast<double>(sigma_nodes);
  const auto xs = uniform_axis(0.0, 1.0, sigma_nodes);
  const auto bulk = graded_spacings(height, dsigma * static_cast<double>(sub), sub, opts);

  std::vector<double> lower{0.0};
  append_from(lower, 0.0, -height, bulk);
  std::reverse(lower.begin(), lower.end());
  std::vector<double> ys = lower;
  const std::size_t split = ys.size() - 1;
  append_from(ys, 0.0, height, bulk);

  const std::size_t nxc = xs.size() - 1, nyc = ys.size() - 1;
  std::vector<Region> tags(nxc * nyc);
  for (std::size_t j = 0; j < nyc; ++j)
    for (std::size_t i = 0; i < nxc; ++i) tags[j * nxc + i] = j < split ? Region::BulkMinus : Region::BulkPlus;
  auto grid = std::make_shared<RectGrid>(GridKind::MacroBulk, xs, std::move(ys), std::move(tags));
  grid->layer_row_begin = split;
  return grid;
}

std::shared_ptr<const RectGrid> build_cell_grid(const CellGeometry& cell, std::int64_t m) {
  check_alignment(cell.profile(), m);
  const auto xs = uniform_axis(0.0, 1.0, m);
  const auto ys = uniform_axis(-1.0, 1.0, 2 * m);
  const std::size_t nxc = xs.size() - 1, nyc = ys.size() - 1;
  std::vector<Region> tags(nxc * nyc);
  for (std::size_t j = 0; j < nyc; ++j) {
    for (std::size_t i = 0; i < nxc; ++i) {
      const Point2 y{(static_cast<double>(i) + 0.5) / static_cast<double>(m),
                     -1.0 + (static_cast<double>(j) + 0.5) / static_cast<double>(m)};
      tags[j * nxc + i] = cell.contains(y) ? Region::Channel : Region::Void;
    }
  }
  auto grid = std::make_shared<RectGrid>(GridKind::Cell, xs, ys, std::move(tags));
  grid->refinement = m;
  return grid;
}

Field::Field(std::shared_ptr<const RectGrid> g, std::vector<double> v, double t)
    : grid(std::move(g)), values(std::move(v)), time(t) {
  if (!grid) throw ValidationError("field without grid");
  if (values.size() != grid->active_count()) throw ValidationError("field value count does not match the grid");
  for (double x : values)
    if (!std::isfinite(x)) throw NumericalError("non-finite field value");
}

Field Field::constant(std::shared_ptr<const RectGrid> g, double c, double t) {
  const auto n = g->active_count();
  return Field(std::move(g), std::vector<double>(n, c), t);
}

namespace {
void require_same_grid(const Field& u, const Field& v) {
  if (!u.grid || u.grid != v.grid) throw ValidationError("fields live on different grids");
}

double channel_weight(const RectGrid& g) {
  return g.kind() == GridKind::Micro ? 1.0 / g.eps : 1.0;
}
}  // namespace

double inner_product_Leps(const Field& u, const Field& v) {
  require_same_grid(u, v);
  const auto& g = *u.grid;
  double bulk = 0.0, chan = 0.0;
  for (std::size_t a = 0; a < g.active_count(); ++a) {
    const double t = u.values[a] * v.values[a] * g.volume(a);
    (g.region(a) == Region::Channel ? chan : bulk) += t;
  }
  return bulk + channel_weight(g) * chan;
}

double norm_Leps(const Field& u) { return std::sqrt(inner_product_Leps(u, u)); }

std::vector<double> face_gradients(const RectGrid& grid, std::span<const double> values) {
  if (values.size() != grid.active_count()) throw ValidationError("value count does not match the grid");
  std::vector<double> g(grid.faces().size(), 0.0);
  for (std::size_t f = 0; f < grid.faces().size(); ++f) {
    const Face& face = grid.faces()[f];
    if (face.internal()) g[f] = (values[face.b] - values[face.a]) / (face.dist_a + face.dist_b);
  }
  return g;
}

GradientParts gradient_parts(const RectGrid& grid, std::span<const double> grads, bool channel_only) {
  if (grads.size() != grid.faces().size()) throw ValidationError("gradient count does not match the grid faces");
  const auto& faces = grid.faces();
  auto counts = [&](std::int32_t f) {
    if (f < 0 || !faces[f].internal()) return false;
    if (!channel_only) return true;
    return grid.region(faces[f].a) == Region::Channel && grid.region(faces[f].b) == Region::Channel;
  };

  GradientParts parts;
  for (std::size_t a = 0; a < grid.active_count(); ++a) {
    const Region r = grid.region(a);
    if (channel_only && r != Region::Channel) continue;
    const auto& cf = grid.cell_faces(a);
    double sum = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      const std::int32_t lo = cf[2 * axis], hi = cf[2 * axis + 1];
      for (std::int32_t f : {lo, hi}) {
        const std::int32_t other = f == lo ? hi : lo;
        double gval = 0.0;
        if (counts(f)) gval = grads[f];
        else if (counts(other)) gval = grads[other];
        sum += 0.5 * gval * gval;
      }
    }
    sum *= grid.volume(a);
    switch (r) {
      case Region::BulkPlus: parts.bulk_plus += sum; break;
      case Region::BulkMinus: parts.bulk_minus += sum; break;
      case Region::Channel: parts.channel += sum; break;
      case Region::Void: break;
    }
  }
  return parts;
}

double norm_Heps(const Field& u, std::span<const double> grads) {
  const auto& g = *u.grid;
  const auto parts = gradient_parts(g, grads);
  const double w = g.kind() == GridKind::Micro ? g.eps : 1.0;
  const double sq = inner_product_Leps(u, u) + parts.bulk_plus + parts.bulk_minus + w * parts.channel;
  return std::sqrt(sq);
}

double norm_Heps(const Field& u) {
  const auto grads = face_gradients(*u.grid, u.values);
  return norm_Heps(u, grads);
}

}  // namespace chanhom
