#ifndef MEDIC_MATRIX_H_
#define MEDIC_MATRIX_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace medic {

// Dense row-major matrix of doubles. Vectors are stored as n x 1 (bias) or
// 1 x n (single sample) matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Row-wise literal, e.g. Matrix{{1, 2}, {3, 4}}. All rows must have equal
  // length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws DimensionError naming `context` unless m is rows x cols.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   std::string_view context);

// Throws NumericError naming `op` if m holds a NaN or Inf.
void require_finite(const Matrix& m, std::string_view op);

}  // namespace medic

#endif  // MEDIC_MATRIX_H_
