#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluxsolve {

// Thrown for invalid user-facing configuration (bad sizes, missing inputs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a stored artifact (checkpoint, dataset) fails revalidation.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or unrecoverable numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw std::invalid_argument("Matrix: size mismatch");
  }

  static Matrix column(const std::vector<double>& v) { return {v.size(), 1, v}; }
  static Matrix row(const std::vector<double>& v) { return {1, v.size(), v}; }
  static Matrix scalar(double v) { return {1, 1, std::vector<double>{v}}; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

}  // namespace fluxsolve
