#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tslstm {

// Error categories used across the library. The C API maps these to codes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VocabError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MetricError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Columns are time steps / feature
// vectors throughout the model (a d x n matrix holds n vectors of width d).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  Vector column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }
  void set_column(std::size_t c, const Vector& v) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_str(const Matrix& m);

// Standard matrix product with fixed row-major accumulation order.
Matrix matmul(const Matrix& a, const Matrix& b);

// a * x  and  a^T * x  for matrix-vector work in the cells.
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_transpose(const Matrix& a, const Vector& x);

// acc += u * v^T
void add_outer(Matrix& acc, const Vector& u, const Vector& v);

Vector sigmoid(const Vector& x);
Vector tanh(const Vector& x);
// Max-subtraction stabilized softmax.
Vector softmax(const Vector& x);
// Arithmetic mean across columns.
Vector mean_columns(const Matrix& m);

}  // namespace tslstm
