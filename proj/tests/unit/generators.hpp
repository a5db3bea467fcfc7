#pragma once

// Small seeded generators for property tests.
#include "chanhom/geometry.hpp"
#include "chanhom/grid.hpp"
#include "chanhom/linsolve.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace gen {

struct Rng {
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  std::mt19937_64 eng;

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng);
  }
  std::vector<double> vec(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }
};

// Centered stack of 1..3 rectangles with breakpoints and half-widths on a
// 1/8 lattice, so that k = 8 always aligns.
inline std::vector<chanhom::ChannelSegment> profile(Rng& r) {
  using chanhom::Rational;
  const auto n = r.integer(1, 3);
  std::vector<std::int64_t> cuts{-8, 8};
  while (static_cast<std::int64_t>(cuts.size()) < n + 1) {
    const auto c = r.integer(-7, 7);
    bool fresh = true;
    for (auto x : cuts) fresh = fresh && x != c;
    if (fresh) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<chanhom::ChannelSegment> segs;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    segs.push_back({Rational(cuts[i], 8), Rational(cuts[i + 1], 8), Rational(2 * r.integer(1, 3), 8)});
  return segs;
}

// Random SPD matrix: symmetric sparse couplings plus a positive shift.
inline chanhom::SparseMatrix spd(Rng& r, std::size_t n) {
  chanhom::SparseBuilder b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      const auto j = static_cast<std::size_t>(r.integer(0, static_cast<std::int64_t>(n) - 1));
      if (j != i) b.add_coupling(i, j, r.uniform(0.1, 2.0));
    }
    b.add(i, i, r.uniform(0.01, 1.0));
  }
  return b.build(true);
}

inline chanhom::Field field(Rng& r, std::shared_ptr<const chanhom::RectGrid> g) {
  return chanhom::Field(g, r.vec(g->active_count()));
}

}  // namespace gen
