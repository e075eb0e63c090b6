#include "tensor.hpp"

#include <cmath>

namespace tslstm {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: " + shape_str(a) + " * vector of length " +
                     std::to_string(x.size()));
  }
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

Vector matvec_transpose(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) {
    throw ShapeError("matvec_transpose: " + shape_str(a) + "^T * vector of length " +
                     std::to_string(x.size()));
  }
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j) * xi;
  }
  return out;
}

void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
  if (acc.rows() != u.size() || acc.cols() != v.size()) {
    throw ShapeError("add_outer: accumulator " + shape_str(acc) + " vs outer " +
                     std::to_string(u.size()) + "x" + std::to_string(v.size()));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) acc(i, j) += u[i] * v[j];
  }
}

Vector sigmoid(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    // Split by sign so exp never overflows.
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Vector tanh(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

Vector softmax(const Vector& x) {
  Vector out(x.size());
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vector mean_columns(const Matrix& m) {
  if (m.cols() == 0) throw ShapeError("mean_columns: matrix has zero columns");
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c);
    out[r] = acc / static_cast<double>(m.cols());
  }
  return out;
}

}  // namespace tslstm
