#include "trap/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace trap {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: " + std::to_string(values_.size()) + " values for shape " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("Matrix: non-finite entry");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " x " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " x " + shape_string(b) + "^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = std::max(0.0, v);
  return out;
}

Matrix relu_backward(const Matrix& upstream, const Matrix& pre_activation) {
  require_same_shape(upstream, pre_activation, "relu_backward");
  Matrix out = upstream;
  auto o = out.values();
  auto p = pre_activation.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (p[i] <= 0.0) o[i] = 0.0;
  }
  return out;
}

PoolResult row_max_pool(const Matrix& m) {
  if (m.rows() == 0) throw ShapeError("row_max_pool: zero-row input");
  PoolResult result{Matrix(1, m.cols()), std::vector<std::size_t>(m.cols(), 0)};
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double best = m(0, c);
    std::size_t best_row = 0;
    for (std::size_t r = 1; r < m.rows(); ++r) {
      if (m(r, c) > best) {
        best = m(r, c);
        best_row = r;
      }
    }
    result.pooled(0, c) = best;
    result.argmax[c] = best_row;
  }
  return result;
}

Matrix softmax(const Matrix& logits) {
  if (logits.rows() != 1 || logits.cols() == 0) {
    throw ShapeError("softmax: expected 1xK row, got " + shape_string(logits));
  }
  Matrix p = logits;
  auto v = p.values();
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
  return p;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::size_t label) {
  if (logits.rows() != 1 || logits.cols() < 2) {
    throw ShapeError("softmax_cross_entropy: expected 1xK row with K >= 2, got " +
                     shape_string(logits));
  }
  if (label >= logits.cols()) {
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range for K=" + std::to_string(logits.cols()));
  }
  auto v = logits.values();
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - mx);
  const double log_z = mx + std::log(total);

  LossResult result{log_z - v[label], softmax(logits)};
  result.dlogits(0, label) -= 1.0;
  return result;
}

Matrix hconcat(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("hconcat: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p(r, c);
    offset += p.cols();
  }
  return out;
}

Matrix column_block(const Matrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols()) throw ShapeError("column_block: range exceeds columns");
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

}  // namespace trap
