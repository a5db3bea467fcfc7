#include "chanhom/errors.hpp"
#include "chanhom/grid.hpp"
#include "generators.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace chanhom;

namespace {

std::shared_ptr<const CellGeometry> half_cell() {
  return std::make_shared<const CellGeometry>(ChannelProfile::rectangular(Rational(1, 2)));
}

std::shared_ptr<const RectGrid> micro(double eps, std::int64_t k, std::shared_ptr<const CellGeometry> cell = half_cell(),
                                      double H = 1.0) {
  return build_micro_grid(build_micro_geometry(eps, H, std::move(cell)), k);
}

}  // namespace

TEST_CASE("layer of eps = 1/2, k = 4 has 4 x 8 cells per column") {
  const auto g = micro(0.5, 4);
  CHECK(g->nx() == 8);
  std::size_t layer = 0, channel = 0;
  for (std::size_t j = 0; j < g->ny(); ++j) {
    for (std::size_t i = 0; i < 4; ++i) {
      const Region r = g->tag(i, j);
      if (r == Region::Channel || r == Region::Void) {
        ++layer;
        CHECK(g->ys()[j + 1] - g->ys()[j] == doctest::Approx(0.125).epsilon(1e-14));
      }
      if (r == Region::Channel) ++channel;
    }
  }
  CHECK(layer == 32);
  CHECK(channel == 16);
  CHECK(g->xs()[1] - g->xs()[0] == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("alignment is enforced exactly") {
  const auto hg = std::make_shared<const CellGeometry>(ChannelProfile::create(
      {{Rational(-1), Rational(-1, 4), Rational(3, 4)},
       {Rational(-1, 4), Rational(1, 4), Rational(1, 4)},
       {Rational(1, 4), Rational(1), Rational(3, 4)}}));
  const auto geom = build_micro_geometry(0.25, 1.0, hg);
  CHECK_THROWS_AS(build_micro_grid(geom, 2), AlignmentError);
  CHECK_THROWS_AS(build_micro_grid(geom, 4), AlignmentError);
  CHECK_NOTHROW(build_micro_grid(geom, 8));
  CHECK_THROWS_AS(build_cell_grid(*hg, 4), AlignmentError);
}

TEST_CASE("channel cells tile the channel domain") {
  gen::Rng r(21);
  for (int n = 0; n < 20; ++n) {
    const auto cell = std::make_shared<const CellGeometry>(ChannelProfile::create(gen::profile(r)));
    for (double eps : {0.5, 0.25, 0.125}) {
      const auto g = micro(eps, 8, cell);
      double vol = 0.0, total = 0.0;
      for (std::size_t a = 0; a < g->active_count(); ++a) {
        if (g->region(a) == Region::Channel) vol += g->volume(a);
        total += g->volume(a);
      }
      CHECK(vol == doctest::Approx(eps * to_double(cell->area())).epsilon(1e-13));
      CHECK(total == doctest::Approx(2.0 * (1.0 - eps) + eps * to_double(cell->area())).epsilon(1e-13));
    }
  }
}

TEST_CASE("face adjacency is consistent") {
  const auto g = micro(0.25, 4);
  for (std::size_t a = 0; a < g->active_count(); ++a) {
    const auto& cf = g->cell_faces(a);
    for (int d = 0; d < 4; ++d) {
      REQUIRE(cf[d] >= 0);
      const Face& f = g->faces()[static_cast<std::size_t>(cf[d])];
      CHECK((f.a == static_cast<std::int32_t>(a) || f.b == static_cast<std::int32_t>(a)));
      CHECK(f.length > 0.0);
    }
  }
  std::size_t lateral = 0;
  double lat_len = 0.0;
  for (const Face& f : g->faces()) {
    if (f.kind == FaceKind::Lateral) {
      ++lateral;
      lat_len += f.length;
      CHECK(g->region(static_cast<std::size_t>(f.a)) == Region::Channel);
    }
    if (f.kind == FaceKind::Interface) CHECK(f.internal());
  }
  CHECK(lateral > 0);
  CHECK(lat_len == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("L_eps inner product examples") {
  const auto g = micro(0.25, 4);
  const Field one = Field::constant(g, 1.0), zero = Field::constant(g, 0.0);
  CHECK(inner_product_Leps(one, one) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(inner_product_Leps(one, zero) == 0.0);
  gen::Rng r(22);
  for (int n = 0; n < 20; ++n) {
    const Field u = gen::field(r, g), v = gen::field(r, g);
    CHECK(inner_product_Leps(u, u) > 0.0);
    CHECK(std::abs(inner_product_Leps(u, v)) <= norm_Leps(u) * norm_Leps(v) * (1 + 1e-14));
    // Channel-supported fields: 1/eps times the plain cell sum.
    std::vector<double> c(g->active_count(), 0.0);
    double plain = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      if (g->region(a) != Region::Channel) continue;
      c[a] = u.values[a];
      plain += g->volume(a) * c[a] * c[a];
    }
    const Field cu(g, c);
    CHECK(inner_product_Leps(cu, cu) == doctest::Approx(plain / 0.25).epsilon(1e-14));
  }
  const auto other = micro(0.125, 4);
  CHECK_THROWS_AS(inner_product_Leps(one, Field::constant(other, 1.0)), ValidationError);
}

TEST_CASE("H_eps norm examples") {
  const auto g = micro(0.25, 4);
  const Field c = Field::constant(g, 3.0);
  CHECK(norm_Heps(c) == doctest::Approx(norm_Leps(c)).epsilon(1e-15));

  std::vector<double> xn(g->active_count());
  for (std::size_t a = 0; a < xn.size(); ++a) xn[a] = g->center(a).y;
  const auto grads = face_gradients(*g, xn);
  const auto parts = gradient_parts(*g, grads);
  CHECK(parts.bulk_plus == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(parts.bulk_minus == doctest::Approx(0.75).epsilon(1e-13));

  gen::Rng r(23);
  for (int n = 0; n < 10; ++n) {
    const Field u = gen::field(r, g);
    const double s = r.uniform(-5.0, 5.0);
    std::vector<double> su(u.values);
    for (auto& x : su) x *= s;
    CHECK(norm_Heps(Field(g, su)) == doctest::Approx(std::abs(s) * norm_Heps(u)).epsilon(1e-13));
  }
}

TEST_CASE("grid construction is deterministic") {
  const auto a = micro(0.125, 4), b = micro(0.125, 4);
  CHECK(a->xs() == b->xs());
  CHECK(a->ys() == b->ys());
  REQUIRE(a->faces().size() == b->faces().size());
  for (std::size_t f = 0; f < a->faces().size(); ++f) {
    CHECK(a->faces()[f].a == b->faces()[f].a);
    CHECK(a->faces()[f].length == b->faces()[f].length);
  }
}

TEST_CASE("graded bulk spacing") {
  const auto g = micro(0.125, 4);
  const auto& ys = g->ys();
  for (std::size_t j = 1; j + 1 < ys.size(); ++j) {
    const double h0 = ys[j] - ys[j - 1], h1 = ys[j + 1] - ys[j];
    CHECK(h1 / h0 <= 1.2 + 1e-12);
    CHECK(h0 / h1 <= 1.2 + 1e-12);
    CHECK(h0 <= 0.125 + 1e-12);
  }
  // First bulk cells next to the layer are no coarser than the layer spacing.
  const std::size_t top = g->layer_row_begin + 8;
  CHECK(ys[top + 1] - ys[top] <= 0.125 / 4 + 1e-14);
}

TEST_CASE("cell grid covers Z*") {
  const auto cell = half_cell();
  const auto g = build_cell_grid(*cell, 4);
  double area = 0.0;
  for (std::size_t a = 0; a < g->active_count(); ++a) area += g->volume(a);
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
  std::size_t top = 0, lat = 0;
  for (const Face& f : g->faces()) {
    if (f.kind == FaceKind::Interface && f.side > 0) ++top;
    if (f.kind == FaceKind::Lateral) ++lat;
  }
  CHECK(top == 2);
  CHECK(lat == 16);
}
