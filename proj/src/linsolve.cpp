#include "chanhom/linsolve.hpp"

#include "chanhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chanhom {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
  if (it == end || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseMatrix::diagonal() const {
  std::vector<double> d(dim());
  for (std::size_t i = 0; i < dim(); ++i) d[i] = at(i, i);
  return d;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseMatrix::operator*(std::span<const double> x) const {
  std::vector<double> y(dim());
  multiply(x, y);
  return y;
}

double SparseMatrix::asymmetry() const {
  double maxabs = 0.0, maxdiff = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      maxabs = std::max(maxabs, std::abs(values_[k]));
      maxdiff = std::max(maxdiff, std::abs(values_[k] - at(cols_[k], i)));
    }
  }
  return maxabs > 0.0 ? maxdiff / maxabs : 0.0;
}

SparseMatrix SparseMatrix::plus_diagonal(std::span<const double> d) const {
  if (d.size() != dim()) throw AssemblyError("diagonal size mismatch");
  SparseMatrix out = *this;
  out.symmetric_ = false;
  for (std::size_t i = 0; i < dim(); ++i) {
    bool found = false;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (cols_[k] == i) {
        out.values_[k] += d[i];
        out.explicit_diag_[i] += d[i];
        found = true;
      }
    }
    if (!found && d[i] != 0.0) throw AssemblyError("missing diagonal entry in row " + std::to_string(i));
  }
  return out;
}

std::vector<double> SparseMatrix::multiply_flux(std::span<const double> x) const {
  if (!couplings_only_) throw AssemblyError("flux-form product needs a coupling-assembled matrix");
  if (x.size() != dim()) throw AssemblyError("vector size mismatch");
  std::vector<double> y(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    double s = explicit_diag_[i] * x[i];
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (cols_[k] != i) s -= values_[k] * (x[i] - x[cols_[k]]);
    y[i] = s;
  }
  return y;
}

void SparseBuilder::push(std::size_t i, std::size_t j, double v, bool coupling) {
  if (i >= dim_ || j >= dim_) throw AssemblyError("matrix index out of range");
  entries_.push_back({i, j, v, entries_.size(), coupling});
}

void SparseBuilder::add(std::size_t i, std::size_t j, double v) { push(i, j, v, false); }

void SparseBuilder::add_coupling(std::size_t i, std::size_t j, double t) {
  push(i, i, t, true);
  push(j, j, t, true);
  push(i, j, -t, true);
  push(j, i, -t, true);
}

SparseMatrix SparseBuilder::build(bool symmetric) const {
  auto sorted = entries_;
  // Every row keeps a diagonal slot so that plus_diagonal works.
  for (std::size_t i = 0; i < dim_; ++i) sorted.push_back({i, i, 0.0, entries_.size() + i, true});
  std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    return a.order < b.order;
  });

  SparseMatrix m;
  m.row_ptr_.assign(dim_ + 1, 0);
  m.explicit_diag_.assign(dim_, 0.0);
  for (const auto& e : sorted) {
    if (e.coupling) continue;
    if (e.i == e.j) m.explicit_diag_[e.i] += e.v;
    else m.couplings_only_ = false;
  }
  for (std::size_t k = 0; k < sorted.size();) {
    const auto i = sorted[k].i, j = sorted[k].j;
    double v = 0.0;
    while (k < sorted.size() && sorted[k].i == i && sorted[k].j == j) v += sorted[k++].v;
    m.cols_.push_back(static_cast<std::uint32_t>(j));
    m.values_.push_back(v);
    m.row_ptr_[i + 1]++;
  }
  for (std::size_t i = 0; i < dim_; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];

  if (symmetric) m.mark_symmetric();
  return m;
}

void SparseMatrix::mark_symmetric() {
  const double asym = asymmetry();
  if (asym > 1e-13) {
    std::ostringstream os;
    os << "assembled matrix is not symmetric (relative asymmetry " << asym << ")";
    throw AssemblyError(os.str());
  }
  for (std::size_t i = 0; i < dim(); ++i)
    if (!(at(i, i) > 0.0)) throw AssemblyError("non-positive diagonal in row " + std::to_string(i));
  symmetric_ = true;
}

std::vector<double> solve_spd(const SparseMatrix& A, std::span<const double> b, const SolveOptions& opts,
                              std::optional<std::span<const double>> x0, SolveStats* stats) {
  const std::size_t n = A.dim();
  if (b.size() != n) throw AssemblyError("right-hand side size mismatch");
  if (!A.symmetric()) throw AssemblyError("solve_spd requires a matrix flagged symmetric");

  std::vector<double> x(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    if (stats) *stats = {0, 0.0};
    return x;
  }
  if (x0) {
    if (x0->size() != n) throw AssemblyError("initial guess size mismatch");
    std::copy(x0->begin(), x0->end(), x.begin());
  }
  const std::size_t maxit =
      opts.maxit > 0 ? opts.maxit : static_cast<std::size_t>(std::ceil(20.0 * std::sqrt(static_cast<double>(n))));

  std::vector<double> inv_diag = A.diagonal();
  for (auto& d : inv_diag) d = 1.0 / d;

  std::vector<double> r(n), z(n), p(n), q(n);
  auto true_residual = [&] {
    A.multiply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    return norm2(r);
  };

  double res = true_residual();
  std::size_t it = 0;
  const double target = opts.tol * bnorm;
  while (res > target && it < maxit) {
    // (Re)start from the true residual.
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    while (it < maxit) {
      A.multiply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0)) throw SolveError("matrix is not positive definite along a search direction", res / bnorm,
                                        static_cast<int>(it));
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      if (norm2(r) <= target) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    res = true_residual();
  }
  if (stats) *stats = {it, res / bnorm};
  if (res > target) {
    std::ostringstream os;
    os << "conjugate gradients did not converge in " << it << " iterations (relative residual " << res / bnorm << ")";
    throw SolveError(os.str(), res / bnorm, static_cast<int>(it));
  }
  return x;
}

}  // namespace chanhom
