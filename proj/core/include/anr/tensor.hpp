#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anr {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Thrown when operand extents are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
  DimensionError(const std::string& op, const Shape& a, const Shape& b);
};

/// Thrown for misuse of the gradient tape (non-scalar loss, reused tape, NaN gradients).
class GradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles.
///
/// `grad` is populated only by Tape::backward for tensors registered with
/// Tape::leaf. Tensors handed to Tape::constant are copied and never written.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t rank() const { return shape.size(); }
  // Rank-2 helpers; a rank-1 tensor is treated as a single row.
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  /// Value of a single-element tensor.
  [[nodiscard]] double item() const;

  std::vector<double>& ensure_grad();
  void zero_grad();
  void clear_grad() { grad.reset(); }
};

}  // namespace anr
