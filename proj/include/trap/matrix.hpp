#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trap {

/// Thrown when operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
///
/// Value type: copies are deep and operations never alias their inputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

Matrix relu(const Matrix& m);
/// Gradient of relu: upstream masked where the pre-activation is not positive.
Matrix relu_backward(const Matrix& upstream, const Matrix& pre_activation);

struct PoolResult {
  Matrix pooled;                     // 1 x cols
  std::vector<std::size_t> argmax;   // row achieving each column max (first on ties)
};

/// Column-wise max over rows.
PoolResult row_max_pool(const Matrix& m);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
};

/// Numerically stable softmax of a 1 x K row.
Matrix softmax(const Matrix& logits);
LossResult softmax_cross_entropy(const Matrix& logits, std::size_t label);

/// Concatenate along columns; all parts must share the row count.
Matrix hconcat(std::span<const Matrix> parts);
/// Columns [begin, begin + count).
Matrix column_block(const Matrix& m, std::size_t begin, std::size_t count);

bool all_finite(const Matrix& m);
std::string shape_string(const Matrix& m);

}  // namespace trap
