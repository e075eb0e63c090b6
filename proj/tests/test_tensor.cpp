#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tensor.hpp"

using namespace tslstm;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.raw()) x = unif(rng);
  return m;
}

// Naive triple-loop product, independent of the library path.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("matmul identity") {
  Matrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 4;
  CHECK(matmul(Matrix::identity(2), m) == m);
}

TEST_CASE("matmul 1x2 times 2x1") {
  Matrix a(1, 2), b(2, 1);
  a(0, 0) = 1;
  a(0, 1) = 2;
  b(0, 0) = 3;
  b(1, 0) = 4;
  Matrix c = matmul(a, b);
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 1);
  CHECK(c(0, 0) == 11.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a = random_matrix(5, 4, rng);
    Matrix b = random_matrix(4, 3, rng);
    Matrix got = matmul(a, b);
    Matrix want = matmul_oracle(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got.raw()[i] == doctest::Approx(want.raw()[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("matmul shape mismatch") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul associativity on random 8x8") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix a = random_matrix(8, 8, rng);
    Matrix b = random_matrix(8, 8, rng);
    Matrix c = random_matrix(8, 8, rng);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double denom = std::max(std::abs(left.raw()[i]), 1.0);
      CHECK(std::abs(left.raw()[i] - right.raw()[i]) / denom < 1e-9);
    }
  }
}

TEST_CASE("sigmoid values and symmetry") {
  CHECK(sigmoid({0.0})[0] == 0.5);
  CHECK(sigmoid({2.0})[0] == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-20.0, 20.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double x = unif(rng);
    Vector s = sigmoid({x, -x});
    CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("tanh values and oddness") {
  CHECK(tanh(Vector{0.0})[0] == 0.0);
  CHECK(tanh(Vector{1.0})[0] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double x = unif(rng);
    CHECK(tanh(Vector{-x})[0] == doctest::Approx(-tanh(Vector{x})[0]).epsilon(1e-15));
  }
}

TEST_CASE("sigmoid and tanh saturate without NaN up to |x| = 700") {
  for (double x : {700.0, -700.0, 650.0, -650.0}) {
    const double s = sigmoid({x})[0];
    const double t = tanh(Vector{x})[0];
    CHECK(std::isfinite(s));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(std::isfinite(t));
    CHECK(t >= -1.0);
    CHECK(t <= 1.0);
  }
  // Strict bounds hold where the rounded value is still representable.
  CHECK(sigmoid({30.0})[0] < 1.0);
  CHECK(sigmoid({-30.0})[0] > 0.0);
  CHECK(tanh(Vector{15.0})[0] < 1.0);
  CHECK(tanh(Vector{-15.0})[0] > -1.0);
}

TEST_CASE("softmax uniform and direct evaluation") {
  Vector u = softmax({0.0, 0.0, 0.0});
  for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Vector s = softmax({1.0, 2.0, 3.0});
  CHECK(s[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and is shift invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vector x(7);
    for (double& v : x) v = unif(rng);
    Vector s = softmax(x);
    double sum = 0.0;
    for (double v : s) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    const double shift = unif(rng);
    Vector xs = x;
    for (double& v : xs) v += shift;
    Vector ss = softmax(xs);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] - ss[i]) < 1e-12);
  }
}

TEST_CASE("softmax survives huge logits") {
  Vector s = softmax({1000.0, 999.0});
  CHECK(std::isfinite(s[0]));
  CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean_columns") {
  Matrix one(3, 1);
  one(0, 0) = 1;
  one(1, 0) = 2;
  one(2, 0) = 3;
  CHECK(mean_columns(one) == Vector{1, 2, 3});

  Matrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 6;
  CHECK(mean_columns(m) == Vector{1.5, 4.5});

  std::mt19937_64 rng(6);
  Matrix c = random_matrix(4, 1, rng);
  Matrix rep(4, 5);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t col = 0; col < 5; ++col) rep(r, col) = c(r, 0);
  }
  Vector mean = mean_columns(rep);
  for (std::size_t r = 0; r < 4; ++r) CHECK(mean[r] == doctest::Approx(c(r, 0)).epsilon(1e-15));

  CHECK_THROWS_AS(mean_columns(Matrix(3, 0)), ShapeError);
}
