#pragma once

#include "oracles.hpp"
#include "varcurve/matrix.hpp"

inline oracle::Mat to_mat(const varcurve::DenseMatrix& a) {
  oracle::Mat m = oracle::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

inline double max_diff(const oracle::Mat& a, const varcurve::DenseMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) d = std::max(d, std::abs(a[i][j] - b(i, j)));
  return d;
}

inline bool rel_close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}
