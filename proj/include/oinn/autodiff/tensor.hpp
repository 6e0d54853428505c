#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oinn::ad {

struct Shape {
  enum class Kind : std::uint8_t { scalar, vector, matrix };

  Kind kind = Kind::scalar;
  std::size_t rows = 1;  // vector length, or matrix row count
  std::size_t cols = 1;

  static constexpr Shape scalar() { return {Kind::scalar, 1, 1}; }
  static constexpr Shape vector(std::size_t n) { return {Kind::vector, n, 1}; }
  static constexpr Shape matrix(std::size_t m, std::size_t n) { return {Kind::matrix, m, n}; }

  constexpr std::size_t size() const { return rows * cols; }
  constexpr bool is_scalar() const { return kind == Kind::scalar; }
  constexpr bool is_vector() const { return kind == Kind::vector; }
  constexpr bool is_matrix() const { return kind == Kind::matrix; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

// Dense row-major tensor of rank 0, 1 or 2.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  static Tensor scalar(double v) { return {Shape::scalar(), {v}}; }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return {Shape::vector(n), std::move(v)};
  }
  // Throws ShapeError when data.size() != m * n.
  static Tensor matrix(std::size_t m, std::size_t n, std::vector<double> data);
  static Tensor zeros(Shape shape) { return {shape, std::vector<double>(shape.size(), 0.0)}; }
  static Tensor filled(Shape shape, double v) { return {shape, std::vector<double>(shape.size(), v)}; }

  // Value of a scalar (or size-1) tensor.
  double item() const;
  double operator[](std::size_t i) const { return data[i]; }
  double& operator[](std::size_t i) { return data[i]; }
};

}  // namespace oinn::ad
