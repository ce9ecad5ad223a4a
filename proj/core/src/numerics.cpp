#include "unicat/numerics.hpp"

#include <cmath>
#include <utility>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError(fmt::format("matrix data length {} does not match {}x{}", data_.size(),
                                 rows, cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for Matrix::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(),
                                 b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order: out(i, j) still receives its k terms in ascending k.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError(fmt::format("matmul_bt: {}x{} times ({}x{})^T", a.rows(), a.cols(),
                                 b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a_row, b.row(j));
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError(fmt::format("matmul_at: ({}x{})^T times {}x{}", a.rows(), a.cols(),
                                 b.rows(), b.cols()));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto a_row = a.row(k);
    const auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix pairwise_euclidean(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError(fmt::format("pairwise_euclidean: dims {} and {}", a.cols(), b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) {
        const double d = ai[k] - bj[k];
        s += d * d;
      }
      out(i, j) = std::sqrt(s);
    }
  }
  return out;
}

Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.rows()) {
      throw IndexError(fmt::format("select_rows: row {} out of {}", rows[r], a.rows()));
    }
    const auto src = a.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix hconcat(std::span<const Matrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t n = blocks.front().rows();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.rows() != n) throw ShapeError("hconcat: row counts differ");
    total += b.cols();
  }
  Matrix out(n, total);
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r).begin();
    for (const auto& b : blocks) dst = std::copy(b.row(r).begin(), b.row(r).end(), dst);
  }
  return out;
}

Matrix column_block(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("column_block: range exceeds columns");
  Matrix out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto src = a.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix l2_normalize_rows(const Matrix& a) {
  Matrix out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = l2_norm(row);
    if (n == 0.0) throw EvaluationError(fmt::format("cannot normalize zero-norm row {}", r));
    for (double& v : row) v /= n;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_finite(std::span<const double> v, std::string_view what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(fmt::format("{}: non-finite value at flat index {}", what, i));
    }
  }
}

void require_finite(const Matrix& m, std::string_view what) { require_finite(m.data(), what); }

}  // namespace unicat
