#include "phl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phl/error.hpp"

namespace phl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::UnstableA: return "UnstableA";
    case ErrorKind::SingularInnovations: return "SingularInnovations";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::RegimeMismatch: return "RegimeMismatch";
    case ErrorKind::MissingKalman: return "MissingKalman";
    case ErrorKind::DegenerateTerminal: return "DegenerateTerminal";
    case ErrorKind::SingularKkt: return "SingularKkt";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorKind::ShapeMismatch,
              std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                  std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                  "x" + std::to_string(b.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch,
                "entry count " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!all_finite()) throw Error(ErrorKind::NonFinite, "matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> v;
  for (const auto& r : rows) v.emplace_back(r);
  return from_rows(v);
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr == 0 ? 0 : rows.front().size();
  std::vector<double> entries;
  entries.reserve(nr * nc);
  for (const auto& r : rows) {
    if (r.size() != nc) throw Error(ErrorKind::ShapeMismatch, "ragged row in matrix literal");
    entries.insert(entries.end(), r.begin(), r.end());
  }
  return {nr, nc, std::move(entries)};
}

Matrix Matrix::column(std::span<const double> values) {
  return {values.size(), 1, std::vector<double>(values.begin(), values.end())};
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw Error(ErrorKind::ShapeMismatch, "block out of range");
  }
  Matrix b(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    std::copy_n(data_.begin() + (r0 + i) * cols_ + c0, nc, b.data_.begin() + i * nc);
  return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& m) {
  if (r0 + m.rows_ > rows_ || c0 + m.cols_ > cols_) {
    throw Error(ErrorKind::ShapeMismatch, "set_block out of range");
  }
  for (std::size_t i = 0; i < m.rows_; ++i)
    std::copy_n(m.data_.begin() + i * m.cols_, m.cols_,
                data_.begin() + (r0 + i) * cols_ + c0);
}

void Matrix::add_block(std::size_t r0, std::size_t c0, const Matrix& m) {
  if (r0 + m.rows_ > rows_ || c0 + m.cols_ > cols_) {
    throw Error(ErrorKind::ShapeMismatch, "add_block out of range");
  }
  for (std::size_t i = 0; i < m.rows_; ++i)
    for (std::size_t j = 0; j < m.cols_; ++j) (*this)(r0 + i, c0 + j) += m(i, j);
}

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double Matrix::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double Matrix::frobenius_norm() const { return std::sqrt(squared_norm()); }

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) shape_error("+", *this, rhs);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) shape_error("-", *this, rhs);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator-(Matrix m) { return m *= -1.0; }
Matrix operator*(double s, Matrix m) { return m *= s; }
Matrix operator*(Matrix m, double s) { return m *= s; }

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols() != rhs.rows()) shape_error("*", lhs, rhs);
  const std::size_t n = lhs.rows(), k = lhs.cols(), m = rhs.cols();
  Matrix out(n, m);
  const double* a = lhs.data().data();
  const double* b = rhs.data().data();
  double* c = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * m;
      double* crow = c + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return out;
}

Matrix mul_transposed(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols() != rhs.cols()) shape_error("mul_transposed", lhs, rhs);
  const std::size_t n = lhs.rows(), k = lhs.cols(), m = rhs.rows();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = lhs.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      auto b = rhs.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix congruence(const Matrix& m, const Matrix& s) {
  return symmetrize(mul_transposed(m * s, m));
}

double frobenius_inner(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) {
    shape_error("frobenius_inner", lhs, rhs);
  }
  double s = 0.0;
  auto a = lhs.data();
  auto b = rhs.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Matrix symmetrize(const Matrix& m) {
  if (!m.is_square()) shape_error("symmetrize", m, m);
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

Matrix power(const Matrix& m, int k) {
  if (!m.is_square()) shape_error("power", m, m);
  if (k < 0) throw Error(ErrorKind::ShapeMismatch, "negative matrix power");
  Matrix out = Matrix::identity(m.rows());
  for (int i = 0; i < k; ++i) out = out * m;
  return out;
}

Matrix hstack(const std::vector<Matrix>& parts) {
  if (parts.empty()) return {};
  std::size_t rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("hstack", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t c = 0;
  for (const auto& p : parts) {
    out.set_block(0, c, p);
    c += p.cols();
  }
  return out;
}

Matrix vstack(const std::vector<Matrix>& parts) {
  if (parts.empty()) return {};
  std::size_t cols = parts.front().cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("vstack", parts.front(), p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t r = 0;
  for (const auto& p : parts) {
    out.set_block(r, 0, p);
    r += p.rows();
  }
  return out;
}

Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols() + b.cols());
  out.set_block(0, 0, a);
  out.set_block(a.rows(), a.cols(), b);
  return out;
}

}  // namespace phl
