#include "chanhom/errors.hpp"
#include "chanhom/macrosim.hpp"
#include "generators.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <memory>

using namespace chanhom;

namespace {

std::shared_ptr<const CellGeometry> cell_w(Rational w) {
  return std::make_shared<const CellGeometry>(ChannelProfile::rectangular(w));
}

InterfaceLayout small_layout(std::int64_t nodes = 4, Rational w = Rational(1, 2), double H = 1.0) {
  return build_interface_layout(cell_w(w), H, nodes, 4, 1);
}

Eigen::MatrixXd dense(const SparseMatrix& A) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.dim()), static_cast<Eigen::Index>(A.dim()));
  for (std::size_t i = 0; i < A.dim(); ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      d(static_cast<Eigen::Index>(i), A.cols()[k]) += A.values()[k];
  return d;
}

MacroState random_state(const MacroProblem& p, gen::Rng& rng, double lo = -1.0, double hi = 1.0) {
  MacroState s;
  s.x = rng.vec(p.op->layout.unknowns(), lo, hi);
  update_traces(*p.op, s.x);
  return s;
}

double through_flux(const MacroProblem& p, const MacroState& s) {
  double q = 0.0;
  for (std::size_t j = 0; j < p.op->layout.nodes; ++j) q += p.op->layout.dsigma * cell_flux(p, s, j).first;
  return q;
}

}  // namespace

TEST_CASE("layout ordering") {
  const auto l = small_layout();
  CHECK(l.nodes == 4);
  CHECK(l.dsigma == 0.25);
  CHECK(l.node(0) == 0.125);
  CHECK(l.cell_count() == 16);  // width 1/2, height 2 at m = 4: 2 x 8 cells
  CHECK(l.cell_offset(1) == l.bulk_count() + 16);
  CHECK(l.trace_index(+1, 0) == l.bulk_count() + 64);
  CHECK(l.trace_index(-1, 3) == l.unknowns() - 1);
}

TEST_CASE("stiffness: symmetric, zero row sums, constants span the kernel") {
  const auto l = small_layout(2);
  const auto op = assemble_macro(l, DiffusionSpec::uniform(1.0, 2.0, 0.5, 0.5));
  CHECK(op.stiffness.asymmetry() == 0.0);
  std::vector<double> ones(op.stiffness.dim(), 1.0);
  const auto r = op.stiffness * std::span<const double>(ones);
  const auto d = op.stiffness.diagonal();
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(d[i] > 0.0);
    CHECK(std::abs(r[i]) <= 1e-12 * d[i]);
  }
  for (std::size_t j = 0; j < 2 * l.nodes; ++j) CHECK(op.mass[l.trace_index(+1, 0) + j] == 0.0);

  // Dense oracle: positive semidefinite with a one dimensional kernel.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(op.stiffness));
  const auto& ev = es.eigenvalues();
  CHECK(std::abs(ev(0)) <= 1e-12 * ev(ev.size() - 1));
  CHECK(ev(1) > 1e-8);

  const auto opd = assemble_macro(l, DiffusionSpec::uniform(1.0, 2.0, 0.5, 0.5), {true, 1.0, 0.0});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esd(dense(opd.stiffness));
  CHECK(esd.eigenvalues()(0) > 1e-8);
}

TEST_CASE("trace elimination leaves an M-matrix on bulk and cell unknowns") {
  // Eliminating the traces leaves a symmetric matrix with positive diagonal and
  // non-positive couplings (an M-matrix structure).
  const auto l = small_layout(2);
  const auto op = assemble_macro(l, DiffusionSpec::uniform(1.0, 1.0, 1.0, 1.0));
  const Eigen::MatrixXd A = dense(op.stiffness);
  const auto nt = static_cast<Eigen::Index>(2 * l.nodes);
  const auto nv = A.rows() - nt;
  const Eigen::MatrixXd S = A.topLeftCorner(nv, nv) -
                            A.topRightCorner(nv, nt) * A.bottomRightCorner(nt, nt).inverse() *
                                A.bottomLeftCorner(nt, nv);
  CHECK((S - S.transpose()).norm() <= 1e-12 * S.norm());
  for (Eigen::Index i = 0; i < nv; ++i) {
    CHECK(S(i, i) > 0.0);
    for (Eigen::Index k = 0; k < nv; ++k)
      if (k != i) CHECK(S(i, k) <= 1e-14);
  }
}

TEST_CASE("zero kinetics: constants preserved, mass conserved") {
  const auto l = small_layout();
  const auto p = make_macro_problem(l, DiffusionSpec::uniform(1.0, 2.0, 0.5, 0.5), {});
  MacroState s;
  s.x.assign(l.unknowns(), 0.7);
  const MacroState s1 = step_macro(p, s, 1.0 / 64);
  for (double v : s1.x) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  for (std::size_t j = 0; j < l.nodes; ++j) {
    CHECK(std::abs(cell_flux(p, s1, j).first) <= 1e-12);
    CHECK(std::abs(cell_flux(p, s1, j).second) <= 1e-12);
  }
  gen::Rng rng(19);
  MacroState r = random_state(p, rng);
  for (int i = 0; i < 10; ++i) {
    const MacroState next = step_macro(p, r, 1.0 / 64);
    CHECK(std::abs(macro_mass_report(p, r, next).relative()) <= 1e-12);
    r = next;
  }
}

TEST_CASE("property: mass identity and flux balance with reactions") {
  KineticsSpec kin;
  kin.f_plus = RateSpec::logistic_clamped(1.0, 1.0, 10.0);
  kin.f_minus = RateSpec::linear_decay(0.3);
  kin.g = RateSpec::linear_decay(0.5);
  kin.h = RateSpec::exchange(0.5, 0.2);
  gen::Rng rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    const auto segs = gen::profile(rng);
    auto cell = std::make_shared<const CellGeometry>(ChannelProfile::create(segs));
    const auto l = build_interface_layout(cell, 1.0, 4, 8, 1);
    DiffusionSpec diff;
    diff.d_plus = rng.uniform(0.5, 2.0);
    diff.d_minus = rng.uniform(0.5, 2.0);
    for (std::size_t i = 0; i < segs.size(); ++i) diff.channel.push_back({rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)});
    const auto p = make_macro_problem(l, diff, kin);
    MacroState s = random_state(p, rng, 0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      const MacroState next = step_macro(p, s, 1.0 / 256);
      CHECK(std::abs(macro_mass_report(p, s, next).relative()) <= 1e-12);
      for (std::size_t j = 0; j < l.nodes; ++j) {
        const auto [rp, rm] = flux_balance_residual(p, next, j);
        CHECK(rp <= 1e-9);
        CHECK(rm <= 1e-9);
        const auto vals = interface_face_values(p, next, j, +1);
        for (double v : vals) CHECK(v == next.trace(l, +1, j));
      }
      s = next;
    }
  }
}

TEST_CASE("lateral absorption strictly decreases the mass") {
  KineticsSpec kin;
  kin.h = RateSpec::exchange(1.0, 0.0);
  const auto l = small_layout();
  const auto p = make_macro_problem(l, DiffusionSpec::uniform(1.0, 1.0, 0.5, 0.5), kin);
  MacroState s;
  s.x.assign(l.unknowns(), 1.0);
  double prev = macro_mass(p, s);
  for (int i = 0; i < 5; ++i) {
    s = step_macro(p, s, 1.0 / 128);
    const double now = macro_mass(p, s);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("vanishing channel diffusivity decouples the bulks") {
  const auto l = small_layout();
  const auto p = make_macro_problem(l, DiffusionSpec::uniform(1.0, 1.0, 1e-12, 1e-12), {});
  MacroState s;
  s.x.assign(l.unknowns(), 0.0);
  const auto& g = *l.bulk;
  auto side_mass = [&](const MacroState& st, Region r) {
    double m = 0.0;
    for (std::size_t a = 0; a < g.active_count(); ++a)
      if (g.region(a) == r) m += g.volume(a) * st.x[a];
    return m;
  };
  for (std::size_t a = 0; a < g.active_count(); ++a) s.x[a] = g.region(a) == Region::BulkPlus ? 1.0 : 0.0;
  update_traces(*p.op, s.x);
  const double plus0 = side_mass(s, Region::BulkPlus);
  for (int i = 0; i < 20; ++i) s = step_macro(p, s, 1.0 / 32);
  CHECK(side_mass(s, Region::BulkPlus) == doctest::Approx(plus0).epsilon(1e-9));
  CHECK(std::abs(side_mass(s, Region::BulkMinus)) <= 1e-9);
}

TEST_CASE("conduction through the layer matches the series network") {
  struct Case {
    Rational w;
    double dp, dm, dyy, H;
  };
  for (const Case c : {Case{Rational(1, 2), 1.0, 2.0, 0.5, 1.0}, Case{Rational(1, 4), 3.0, 0.5, 2.0, 0.5},
                       Case{Rational(3, 4), 1.0, 1.0, 0.1, 2.0}}) {
    const auto l = build_interface_layout(cell_w(c.w), c.H, 8, 8, 1);
    const auto p = make_macro_problem(l, DiffusionSpec::uniform(c.dp, c.dm, 0.7, c.dyy), {}, {true, 1.0, 0.0});
    const MacroState s = macro_steady_state(p);
    const double oracle = 1.0 / (c.H / c.dp + 2.0 / (c.dyy * to_double(c.w)) + c.H / c.dm);
    CHECK(through_flux(p, s) == doctest::Approx(oracle).epsilon(1e-8));
    for (std::size_t j = 0; j < l.nodes; ++j)
      CHECK(cell_flux(p, s, j).first == doctest::Approx(-cell_flux(p, s, j).second).epsilon(1e-8));
  }
}

TEST_CASE("errors and trivial runs") {
  const auto l = small_layout();
  const auto p = make_macro_problem(l, DiffusionSpec::uniform(1.0, 1.0, 0.5, 0.5), {});
  CHECK_THROWS_AS(macro_steady_state(p), ValidationError);
  InitialData init;
  init.plus = InitialExpr::constant(1.0);
  const auto traj = run_macro(p, init, 0.0, 1.0 / 64, 1);
  CHECK(traj.steps == 0);
  CHECK(traj.snapshots.size() == 1);
  CHECK_THROWS_AS(make_macro_problem(l, DiffusionSpec::uniform(1.0, 1.0, 0.5, 0.0), {}), ConfigError);
}
