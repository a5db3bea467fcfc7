#include "chanhom/errors.hpp"
#include "chanhom/geometry.hpp"
#include "generators.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace chanhom;

namespace {

std::shared_ptr<const CellGeometry> cell_w(Rational w) {
  return std::make_shared<const CellGeometry>(ChannelProfile::rectangular(w));
}

CellGeometry hourglass() {
  return CellGeometry(ChannelProfile::create({{Rational(-1), Rational(-1, 4), Rational(3, 4)},
                                              {Rational(-1, 4), Rational(1, 4), Rational(1, 4)},
                                              {Rational(1, 4), Rational(1), Rational(3, 4)}}));
}

bool in_rectangles(const CellGeometry& c, Point2 y) {
  for (const auto& r : c.rectangles())
    if (y.x > to_double(r.x0) && y.x < to_double(r.x1) && y.y > to_double(r.y0) && y.y < to_double(r.y1)) return true;
  return false;
}

}  // namespace

TEST_CASE("half-width rectangular cell") {
  const auto c = cell_w(Rational(1, 2));
  CHECK(c->area() == Rational(1));
  CHECK(c->top_length() == Rational(1, 2));
  CHECK(c->bottom_length() == Rational(1, 2));
  CHECK(c->lateral_length() == Rational(4));
  REQUIRE(c->rectangles().size() == 1);
  CHECK(c->rectangles()[0].x0 == Rational(1, 4));
  CHECK(c->rectangles()[0].x1 == Rational(3, 4));
  CHECK(c->lateral_clearance() == Rational(1, 4));
}

TEST_CASE("hourglass cell measures") {
  const auto c = hourglass();
  CHECK(c.area() == Rational(5, 4));
  CHECK(c.lateral_length() == Rational(5));
  CHECK(c.top_length() == Rational(3, 4));
  CHECK(c.lateral_clearance() == Rational(1, 8));
}

TEST_CASE("invalid profiles are rejected") {
  CHECK_THROWS_WITH_AS(ChannelProfile::rectangular(Rational(1)), doctest::Contains("channel touches lateral boundary"),
                       GeometryError);
  CHECK_THROWS_AS(ChannelProfile::rectangular(Rational(0)), GeometryError);
  CHECK_THROWS_AS(ChannelProfile::create({{Rational(-1), Rational(0), Rational(1, 2)}}), GeometryError);
  CHECK_THROWS_AS(ChannelProfile::create({{Rational(-1), Rational(0), Rational(1, 2)},
                                          {Rational(1, 4), Rational(1), Rational(1, 2)}}),
                  GeometryError);
  CHECK_THROWS_AS(ChannelProfile::create({{Rational(-1), Rational(1), Rational(1, 3)}}, 4), GeometryError);
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("1/4") == Rational(1, 4));
  CHECK(parse_rational(" -3 / 6 ") == Rational(-1, 2));
  CHECK(parse_rational("0.125") == Rational(1, 8));
  CHECK(parse_rational("7") == Rational(7));
  CHECK_THROWS_AS(parse_rational("1/0"), ValidationError);
  CHECK_THROWS_AS(parse_rational("abc"), ValidationError);
  CHECK(to_string(Rational(3, 6)) == "1/2");
}

TEST_CASE("micro geometry counts and measures") {
  const auto c = cell_w(Rational(1, 2));
  const auto g2 = build_micro_geometry(0.5, 1.0, c);
  CHECK(g2.columns() == 2);
  CHECK(g2.channel_area() == doctest::Approx(0.5).epsilon(1e-15));
  const auto g4 = build_micro_geometry(0.25, 1.0, c);
  CHECK(g4.columns() == 4);
  CHECK(g4.lateral_length() == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(g4.bulk_area(+1) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("eps must have an integer inverse and stay below H") {
  const auto c = cell_w(Rational(1, 2));
  CHECK_THROWS_WITH_AS(build_micro_geometry(0.3, 1.0, c), doctest::Contains("eps^-1 must be a positive integer"),
                       GeometryError);
  CHECK_THROWS_AS(build_micro_geometry(1.0, 1.0, c), GeometryError);
  CHECK_THROWS_AS(build_micro_geometry(-0.25, 1.0, c), GeometryError);
  CHECK(inverse_scale(1.0 / 16.0).value() == 16);
  CHECK_FALSE(inverse_scale(0.3).has_value());
}

TEST_CASE("property: channel area over eps equals |Z*| for random profiles") {
  gen::Rng r(11);
  for (int n = 0; n < 50; ++n) {
    const auto cell = std::make_shared<const CellGeometry>(ChannelProfile::create(gen::profile(r)));
    Rational expect(0);
    for (const auto& s : cell->profile().segments()) expect += s.width * (s.y_hi - s.y_lo);
    CHECK(cell->area() == expect);
    Rational lat(0);
    for (const auto& seg : cell->lateral()) lat += seg.length();
    CHECK(cell->lateral_length() == lat);
    for (std::int64_t inv : {1, 2, 4, 8}) {
      const double eps = 1.0 / static_cast<double>(inv);
      if (!(eps < 1.5)) continue;
      const auto g = build_micro_geometry(eps, 1.5, cell);
      CHECK(g.channel_area() / eps == doctest::Approx(to_double(cell->area())).epsilon(1e-14));
      CHECK(g.lateral_length() == doctest::Approx(to_double(cell->lateral_length())).epsilon(1e-14));
    }
  }
}

TEST_CASE("property: column map round trip and classifier agreement") {
  gen::Rng r(12);
  for (int n = 0; n < 10; ++n) {
    const auto cell = std::make_shared<const CellGeometry>(ChannelProfile::create(gen::profile(r)));
    const auto g = build_micro_geometry(0.125, 1.0, cell);
    for (int s = 0; s < 1000; ++s) {
      const Point2 x{r.uniform(0.0, 1.0), r.uniform(-1.0, 1.0)};
      const Region reg = g.classify(x);
      if (std::abs(x.y) > g.eps()) {
        CHECK(reg == (x.y > 0 ? Region::BulkPlus : Region::BulkMinus));
        continue;
      }
      const Point2 y = g.to_cell(x);
      CHECK((reg == Region::Channel) == in_rectangles(*cell, y));
      const Point2 back = g.from_cell(g.column_of(x.x), y);
      CHECK(std::abs(back.x - x.x) < 1e-12);
      CHECK(std::abs(back.y - x.y) < 1e-12);
    }
  }
}
