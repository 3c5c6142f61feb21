#include "varcurve/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "varcurve/errors.hpp"

namespace varcurve {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::InvalidArgument,
                "matrix of " + std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
                    std::to_string(rows * cols) + " entries, got " + std::to_string(data_.size()));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "matrix entry is not finite");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::outer(std::span<const double> column, std::span<const double> row) {
  DenseMatrix m(column.size(), row.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = column[i] * row[j];
  }
  return m;
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(ErrorCode::InvalidArgument, "matrix sum of mismatched shapes");
  }
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(ErrorCode::InvalidArgument, "matrix difference of mismatched shapes");
  }
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols_ != b.rows_) throw Error(ErrorCode::InvalidArgument, "matrix product of mismatched shapes");
  DenseMatrix c(a.rows_, b.cols_);
  const auto n = static_cast<long>(a.rows_);
#pragma omp parallel for schedule(static) if (a.rows_ * a.cols_ * b.cols_ > (1u << 21))
  for (long i = 0; i < n; ++i) {
    double* ci = c.data_.data() + i * c.cols_;
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const double aik = a.data_[i * a.cols_ + k];
      if (aik == 0.0) continue;
      const double* bk = b.data_.data() + k * b.cols_;
      for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Vector left_multiply(std::span<const double> x, const DenseMatrix& a) {
  if (x.size() != a.rows()) throw Error(ErrorCode::InvalidArgument, "row vector length mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (x[i] == 0.0) continue;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += x[i] * r[j];
  }
  return y;
}

Vector right_multiply(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(ErrorCode::InvalidArgument, "column vector length mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "dot product length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

Vector ones(std::size_t n) { return Vector(n, 1.0); }

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::InvalidArgument, "comparison of mismatched shapes");
  }
  double m = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) m = std::max(m, std::abs(av[k] - bv[k]));
  return m;
}

bool is_irreducible(const DenseMatrix& q) {
  const std::size_t n = q.rows();
  if (n == 0) return false;
  auto reaches_all = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        const double rate = forward ? q(i, j) : q(j, i);
        if (j != i && rate > 0.0 && !seen[j]) {
          seen[j] = 1;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == n;
  };
  return reaches_all(true) && reaches_all(false);
}

GeneratorMatrix::GeneratorMatrix(DenseMatrix q, const Tolerances& tol) : q_(std::move(q)) {
  if (!q_.square() || q_.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "generator must be a nonempty square matrix");
  }
  const std::size_t n = q_.rows();
  for (std::size_t i = 0; i < n; ++i) max_exit_rate_ = std::max(max_exit_rate_, std::abs(q_(i, i)));
  const double row_tol = tol.generator_row_sum * std::max(1.0, max_exit_rate_);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = q_(i, j);
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "generator entry is not finite");
      if (i != j && v < 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    "negative off-diagonal generator entry at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      }
      sum += v;
    }
    if (q_(i, i) > 0.0) throw Error(ErrorCode::InvalidArgument, "positive generator diagonal");
    if (std::abs(sum) > row_tol) {
      throw Error(ErrorCode::InvalidArgument,
                  "generator row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
  if (n > 1 && !is_irreducible(q_)) {
    throw Error(ErrorCode::NotIrreducible, "generator is not irreducible");
  }
}

LuDecomposition::LuDecomposition(DenseMatrix a, const Tolerances& tol) : lu_(std::move(a)) {
  if (!lu_.square()) throw Error(ErrorCode::InvalidArgument, "LU of a non-square matrix");
  const std::size_t n = lu_.rows();
  const double threshold = tol.pivot_relative * lu_.max_abs();
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        p = i;
      }
    }
    if (!(best > threshold)) {
      throw Error(ErrorCode::SingularMatrix, "pivot " + std::to_string(best) + " at column " +
                                                 std::to_string(k) + " below threshold");
    }
    if (p != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
      std::swap(perm_[k], perm_[p]);
    }
    const double pivot = lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      double* ri = lu_.row(i).data();
      const double* rk = lu_.row(k).data();
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
    }
  }
}

DenseMatrix LuDecomposition::solve(const DenseMatrix& b) const {
  const std::size_t n = lu_.rows();
  if (b.rows() != n) throw Error(ErrorCode::InvalidArgument, "right-hand side is not conformable");
  const std::size_t m = b.cols();
  DenseMatrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = b.row(perm_[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* xi = x.row(i).data();
    for (std::size_t k = 0; k < i; ++k) {
      const double f = lu_(i, k);
      if (f == 0.0) continue;
      const double* xk = x.row(k).data();
      for (std::size_t j = 0; j < m; ++j) xi[j] -= f * xk[j];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double* xi = x.row(ii).data();
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double f = lu_(ii, k);
      if (f == 0.0) continue;
      const double* xk = x.row(k).data();
      for (std::size_t j = 0; j < m; ++j) xi[j] -= f * xk[j];
    }
    const double d = lu_(ii, ii);
    for (std::size_t j = 0; j < m; ++j) xi[j] /= d;
  }
  return x;
}

Vector LuDecomposition::solve(std::span<const double> b) const {
  DenseMatrix rhs(b.size(), 1, Vector(b.begin(), b.end()));
  const DenseMatrix x = solve(rhs);
  return Vector(x.values().begin(), x.values().end());
}

DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b, const Tolerances& tol) {
  if (!a.square()) throw Error(ErrorCode::InvalidArgument, "solve_linear needs a square matrix");
  const LuDecomposition lu(a, tol);
  DenseMatrix x = lu.solve(b);
  // One step of iterative refinement when the residual is above target.
  const double target = tol.solve_residual * std::max(b.max_abs(), 1e-300);
  DenseMatrix residual = b - a * x;
  if (residual.max_abs() > target) {
    x += lu.solve(residual);
    residual = b - a * x;
    if (residual.max_abs() > target * std::max(1.0, a.max_abs() * x.max_abs())) {
      throw Error(ErrorCode::NumericalFailure, "linear solve residual " +
                                                   std::to_string(residual.max_abs()));
    }
  }
  return x;
}

Vector stationary_distribution(const GeneratorMatrix& q, const Tolerances& tol) {
  const std::size_t n = q.size();
  if (n == 1) return {1.0};
  // pi Q = 0 as Q^T pi^T = 0, with the last balance equation replaced by sum(pi) = 1.
  DenseMatrix a = q.matrix().transpose();
  for (std::size_t j = 0; j < n; ++j) a(n - 1, j) = 1.0;
  DenseMatrix rhs(n, 1);
  rhs(n - 1, 0) = 1.0;
  const DenseMatrix x = solve_linear(a, rhs, tol);
  Vector pi(x.values().begin(), x.values().end());
  for (double& p : pi) {
    if (p < 0.0) {
      if (p < -tol.stationary_residual) {
        throw Error(ErrorCode::NumericalFailure, "stationary vector has a negative entry");
      }
      p = 0.0;
    }
  }
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& p : pi) p /= total;
  const Vector balance = left_multiply(pi, q.matrix());
  for (double b : balance) {
    if (std::abs(b) > tol.stationary_residual * std::max(1.0, q.max_exit_rate())) {
      throw Error(ErrorCode::NumericalFailure, "stationary balance residual " + std::to_string(b));
    }
  }
  return pi;
}

PoissonWeights poisson_weights(double mean, double truncation) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw Error(ErrorCode::InvalidArgument, "Poisson mean must be finite and nonnegative");
  }
  PoissonWeights out;
  if (mean == 0.0) {
    out.weights = {1.0};
    return out;
  }
  // Walk outward from the mode with unnormalized ratios; the cutoff relative to
  // the mode weight keeps the dropped tail mass well below `truncation`.
  const auto mode = static_cast<std::size_t>(std::floor(mean));
  const double cutoff = truncation * 1e-4 / std::max(1.0, std::sqrt(mean));
  std::vector<double> up{1.0};
  for (std::size_t n = mode;; ++n) {
    const double next = up.back() * mean / static_cast<double>(n + 1);
    if (next < cutoff && static_cast<double>(n) > mean) break;
    up.push_back(next);
  }
  std::vector<double> down;
  double w = 1.0;
  for (std::size_t n = mode; n > 0; --n) {
    w *= static_cast<double>(n) / mean;
    if (w < cutoff) break;
    down.push_back(w);
  }
  out.first = mode - down.size();
  out.weights.assign(down.rbegin(), down.rend());
  out.weights.insert(out.weights.end(), up.begin(), up.end());
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& x : out.weights) x /= total;
  return out;
}

DenseMatrix transition_kernel(const GeneratorMatrix& q, double t, const Tolerances& tol) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "time must be >= 0");
  const std::size_t n = q.size();
  const double rate = q.max_exit_rate();
  if (t == 0.0 || rate == 0.0) return DenseMatrix::identity(n);
  if (rate * t > 1e8) {
    throw Error(ErrorCode::NumericalFailure, "uniformization horizon rate*t = " +
                                                 std::to_string(rate * t) + " exceeds 1e8");
  }
  const DenseMatrix step = DenseMatrix::identity(n) + q.matrix() * (1.0 / rate);
  const PoissonWeights w = poisson_weights(rate * t, tol.kernel_truncation);

  DenseMatrix power = DenseMatrix::identity(n);
  DenseMatrix result(n, n);
  double remaining = 1.0;
  for (std::size_t k = 0; k <= w.last(); ++k) {
    if (k >= w.first) {
      const double wk = w.weights[k - w.first];
      result += power * wk;
      remaining -= wk;
    }
    DenseMatrix next = power * step;
    // Steady state: later powers no longer change, so the remaining mass
    // multiplies the current power.
    if (max_abs_diff(next, power) < 1e-16) {
      if (remaining > 0.0) result += next * remaining;
      break;
    }
    power = std::move(next);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto r = result.row(i);
    for (double& v : r) v = std::clamp(v, 0.0, 1.0);
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    for (double& v : r) v /= s;
  }
  return result;
}

}  // namespace varcurve
