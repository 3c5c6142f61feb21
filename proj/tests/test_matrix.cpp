#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "varcurve/errors.hpp"
#include "varcurve/matrix.hpp"

using namespace varcurve;

TEST_SUITE("matrix") {
  TEST_CASE("identity system returns the right-hand side") {
    const DenseMatrix b(3, 2, {1, 2, 3, 4, 5, 6});
    const DenseMatrix x = solve_linear(DenseMatrix::identity(3), b);
    CHECK(max_abs_diff(x, b) == 0.0);
  }

  TEST_CASE("solve matches an independent elimination") {
    const DenseMatrix a(3, 3, {4, -2, 1, 3, 6, -4, 2, 1, 8});
    const Vector b{12, -25, 32};
    const Vector x = LuDecomposition(a).solve(b);
    const oracle::Vec y = oracle::solve(to_mat(a), b);
    for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-13));
  }

  TEST_CASE("singular matrix is reported") {
    const DenseMatrix a(2, 2, {1, 2, 2, 4});
    try {
      (void)solve_linear(a, DenseMatrix::identity(2));
      FAIL("expected SingularMatrix");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SingularMatrix);
    }
  }

  TEST_CASE("generator validation") {
    CHECK_THROWS_AS(GeneratorMatrix(DenseMatrix(2, 2, {-1, 1, 1, -0.5})), Error);
    CHECK_THROWS_AS(GeneratorMatrix(DenseMatrix(2, 2, {1, -1, 1, -1})), Error);
    try {
      GeneratorMatrix(DenseMatrix(2, 2, {-1, 1, 0, 0}));
      FAIL("expected NotIrreducible");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotIrreducible);
    }
    CHECK(is_irreducible(DenseMatrix(3, 3, {-1, 1, 0, 0, -1, 1, 1, 0, -1})));
    CHECK_FALSE(is_irreducible(DenseMatrix(3, 3, {-1, 1, 0, 1, -1, 0, 1, 0, -1})));
  }

  TEST_CASE("stationary distribution of a birth-death chain") {
    const double lambda = 0.7, mu = 1.3;
    const int K = 12;
    const GeneratorMatrix q(DenseMatrix(K + 1, K + 1, [&] {
      std::vector<double> v;
      for (const auto& row : oracle::mm1k_generator(lambda, mu, K)) v.insert(v.end(), row.begin(), row.end());
      return v;
    }()));
    const Vector pi = stationary_distribution(q);
    const oracle::Vec ref = oracle::mm1k_stationary(lambda, mu, K);
    for (int i = 0; i <= K; ++i) CHECK(pi[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }

  TEST_CASE("poisson weights sum to one and cover the mean") {
    for (double m : {0.0, 0.3, 5.0, 400.0, 2e5}) {
      const PoissonWeights w = poisson_weights(m, 1e-12);
      double s = 0.0;
      for (double x : w.weights) s += x;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(double(w.first) <= m);
      CHECK(double(w.last()) >= m);
    }
  }

  TEST_CASE("transition kernel matches scaling and squaring") {
    const auto gen = oracle::mm1k_generator(1.1, 0.9, 6);
    std::vector<double> flat;
    for (const auto& row : gen) flat.insert(flat.end(), row.begin(), row.end());
    const GeneratorMatrix q(DenseMatrix(7, 7, flat));
    for (double t : {0.0, 0.01, 1.0, 25.0}) {
      CHECK(max_diff(oracle::expm(gen, t), transition_kernel(q, t)) < 1e-11);
    }
  }
}
