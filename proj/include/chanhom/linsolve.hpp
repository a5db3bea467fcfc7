#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace chanhom {

/// Compressed-row sparse matrix. Built through SparseBuilder.
class SparseMatrix {
public:
  SparseMatrix() = default;

  std::size_t dim() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  bool symmetric() const noexcept { return symmetric_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t>& cols() const noexcept { return cols_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(std::size_t i, std::size_t j) const;
  std::vector<double> diagonal() const;

  /// y = A x (fixed summation order).
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> operator*(std::span<const double> x) const;

  /// y = A x evaluated as sum_j t_ij (x_i - x_j) + s_i x_i, where t are the
  /// two-point couplings and s the explicit diagonal. Constants in the kernel
  /// map to exact zeros. Throws AssemblyError if an off-diagonal entry did not
  /// come from add_coupling.
  std::vector<double> multiply_flux(std::span<const double> x) const;

  /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
  double asymmetry() const;

  /// Returns A + diag(d) (flag not carried over).
  SparseMatrix plus_diagonal(std::span<const double> d) const;

  /// Checks symmetry (1e-13 relative) and a positive diagonal, then sets the
  /// symmetry flag. Throws AssemblyError.
  void mark_symmetric();

private:
  friend class SparseBuilder;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
  std::vector<double> explicit_diag_;
  bool couplings_only_ = true;
  bool symmetric_ = false;
};

/// Accumulates (i, j, v) contributions; duplicates are summed in insertion order.
class SparseBuilder {
public:
  explicit SparseBuilder(std::size_t dim) : dim_(dim) {}

  void add(std::size_t i, std::size_t j, double v);
  /// Adds the symmetric two-point coupling t (u_i - u_j) to rows i and j.
  void add_coupling(std::size_t i, std::size_t j, double t);

  /// Compresses the entries. With `symmetric` the matrix is checked for
  /// symmetry (1e-13 relative) and a positive diagonal; violations throw
  /// AssemblyError.
  SparseMatrix build(bool symmetric) const;

private:
  struct Entry {
    std::size_t i, j;
    double v;
    std::size_t order;
    bool coupling;
  };
  void push(std::size_t i, std::size_t j, double v, bool coupling);

  std::size_t dim_;
  std::vector<Entry> entries_;
};

struct SolveOptions {
  double tol = 1e-10;     // relative residual ||Ax - b|| / ||b||
  std::size_t maxit = 0;  // 0: 20 * sqrt(dim)
};

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for SPD systems. Throws
/// SolveError with the final residual if the tolerance is not reached and
/// AssemblyError if A is not flagged symmetric.
std::vector<double> solve_spd(const SparseMatrix& A, std::span<const double> b, const SolveOptions& opts = {},
                              std::optional<std::span<const double>> x0 = std::nullopt, SolveStats* stats = nullptr);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace chanhom
