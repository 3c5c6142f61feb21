#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "varcurve/tolerances.hpp"

namespace varcurve {

using Vector = std::vector<double>;

/// Dense row-major real matrix with value semantics.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix identity(std::size_t n);
  /// column * row, e.g. 1 pi.
  static DenseMatrix outer(std::span<const double> column, std::span<const double> row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> values() const { return data_; }

  double max_abs() const;
  DenseMatrix transpose() const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double scale);

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
  friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }
  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// x A for a row vector x.
Vector left_multiply(std::span<const double> x, const DenseMatrix& a);
/// A x for a column vector x.
Vector right_multiply(const DenseMatrix& a, std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
Vector ones(std::size_t n);
/// Largest entrywise |a - b|.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

/// Square CTMC generator: zero row sums, nonnegative off-diagonal,
/// irreducible. Validated on construction.
class GeneratorMatrix {
 public:
  explicit GeneratorMatrix(DenseMatrix q, const Tolerances& tol = kTolerances);

  const DenseMatrix& matrix() const { return q_; }
  std::size_t size() const { return q_.rows(); }
  /// max_i |Q_ii|
  double max_exit_rate() const { return max_exit_rate_; }

 private:
  DenseMatrix q_;
  double max_exit_rate_ = 0.0;
};

/// True when every state reaches every other through positive off-diagonal
/// entries of q.
bool is_irreducible(const DenseMatrix& q);

/// LU factorization with partial pivoting.
class LuDecomposition {
 public:
  explicit LuDecomposition(DenseMatrix a, const Tolerances& tol = kTolerances);

  DenseMatrix solve(const DenseMatrix& b) const;
  Vector solve(std::span<const double> b) const;
  std::size_t size() const { return lu_.rows(); }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

/// X with A X = B. Throws SingularMatrix.
DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b,
                         const Tolerances& tol = kTolerances);

/// Stationary row vector of an irreducible generator.
Vector stationary_distribution(const GeneratorMatrix& q, const Tolerances& tol = kTolerances);

/// Truncated Poisson(mean) probabilities on [first, first + weights.size()).
/// Weights are normalized to the retained mass.
struct PoissonWeights {
  std::size_t first = 0;
  std::vector<double> weights;
  std::size_t last() const { return first + weights.size() - 1; }
};
PoissonWeights poisson_weights(double mean, double truncation);

/// e^{Qt} by uniformization.
DenseMatrix transition_kernel(const GeneratorMatrix& q, double t,
                              const Tolerances& tol = kTolerances);

}  // namespace varcurve
