#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace unicat {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a · b. Each output cell accumulates k = 0..n-1 left to right.
Matrix matmul(const Matrix& a, const Matrix& b);
// a · bᵀ (rows of a against rows of b); same summation order guarantee.
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// aᵀ · b; accumulates over the shared row index in ascending order.
Matrix matmul_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// D[i][j] = ||a_i - b_j||_2, computed from coordinate differences (no
// expansion trick) so D >= 0 exactly and D[i][i] = 0 when a = b.
Matrix pairwise_euclidean(const Matrix& a, const Matrix& b);

Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows);
Matrix hconcat(std::span<const Matrix> blocks);
// Copy of columns [begin, begin + count).
Matrix column_block(const Matrix& a, std::size_t begin, std::size_t count);
Matrix l2_normalize_rows(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(std::span<const double> v, std::string_view what);

}  // namespace unicat
