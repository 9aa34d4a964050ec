#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace phl {

/// Dense row-major real matrix for the small (<= ~64) dimensions used
/// throughout. Construction from explicit entries rejects NaN/Inf; results of
/// arithmetic are not re-checked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Matrix transpose() const;
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& m);
  void add_block(std::size_t r0, std::size_t c0, const Matrix& m);

  double trace() const;
  double frobenius_norm() const;
  double squared_norm() const;
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator-=(const Matrix& rhs);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix m);
Matrix operator*(const Matrix& lhs, const Matrix& rhs);
Matrix operator*(double s, Matrix m);
Matrix operator*(Matrix m, double s);

/// lhs * rhs^T without materializing the transpose.
Matrix mul_transposed(const Matrix& lhs, const Matrix& rhs);

/// m * s * m^T for symmetric s; the result is exactly symmetric.
Matrix congruence(const Matrix& m, const Matrix& s);

/// trace(lhs * rhs^T) = sum of elementwise products.
double frobenius_inner(const Matrix& lhs, const Matrix& rhs);

Matrix symmetrize(const Matrix& m);
Matrix power(const Matrix& m, int k);
Matrix hstack(const std::vector<Matrix>& parts);
Matrix vstack(const std::vector<Matrix>& parts);
Matrix block_diagonal(const Matrix& a, const Matrix& b);

}  // namespace phl
